//! Independent checking of solver output.

use crate::cone::cone_violation;
use crate::program::{Cone, ConicProgram};
use crate::solver::{SolveResult, Status};

/// Default relative tolerance of [`verify_certificate`].
pub const VERIFY_TOL: f64 = 1e-6;

/// Recomputes residuals and cone membership of `result` from scratch.
///
/// Optimal results need primal feasibility, dual feasibility and a small
/// duality gap, each relative to the larger of the data and the magnitude
/// of the terms that cancel in the residual; infeasibility results need a valid ray. Any other status
/// fails.
pub fn verify_certificate(prog: &ConicProgram, result: &SolveResult) -> bool {
    verify_certificate_with(prog, result, VERIFY_TOL)
}

pub fn verify_certificate_with(prog: &ConicProgram, result: &SolveResult, tol: f64) -> bool {
    let n = prog.num_vars();
    let m = prog.num_rows();
    if result.x.len() != n || result.y.len() != m {
        return false;
    }
    if !result.x.iter().chain(&result.y).all(|v| v.is_finite()) {
        return false;
    }
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let x = &result.x;
    let y = &result.y;
    match result.status {
        Status::Optimal => {
            let s = prog.slack(x);
            let ax: Vec<f64> = prog.a.to_triplets().iter().fold(vec![0.0; m], |mut acc, &(r, c, v)| {
                acc[r] += (v * x[c]).abs();
                acc
            });
            let pscale = 1.0 + inf(&prog.b).max(inf(&ax));
            if !in_cones(prog, &s, false, tol * pscale) {
                return false;
            }
            let mut r = prog.c.clone();
            prog.a.tr_mul_add(1.0, y, &mut r);
            let aty: Vec<f64> = prog.a.to_triplets().iter().fold(vec![0.0; n], |mut acc, &(r, c, v)| {
                acc[c] += (v * y[r]).abs();
                acc
            });
            let dscale = 1.0 + inf(&prog.c).max(inf(&aty));
            if inf(&r) > tol * dscale {
                return false;
            }
            if !in_cones(prog, y, true, tol * dscale) {
                return false;
            }
            let cx: f64 = prog.c.iter().zip(x).map(|(a, b)| a * b).sum();
            let by: f64 = prog.b.iter().zip(y).map(|(a, b)| a * b).sum();
            (cx + by).abs() <= tol * (1.0 + cx.abs() + by.abs())
        }
        Status::PrimalInfeasible => {
            let by: f64 = prog.b.iter().zip(y).map(|(a, b)| a * b).sum();
            if by >= 0.0 {
                return false;
            }
            let mut r = vec![0.0; n];
            prog.a.tr_mul_add(1.0, y, &mut r);
            let scale = -by;
            inf(&r) <= tol * scale * (1.0 + inf(&prog.c)) && in_cones(prog, y, true, tol * scale)
        }
        Status::DualInfeasible => {
            let cx: f64 = prog.c.iter().zip(x).map(|(a, b)| a * b).sum();
            if cx >= 0.0 {
                return false;
            }
            let mut s = vec![0.0; m];
            prog.a.mul_add(-1.0, x, &mut s);
            in_cones(prog, &s, false, tol * -cx * (1.0 + inf(&prog.b)))
        }
        _ => false,
    }
}

/// Membership of `v` in the product cone (or its dual, where zero cones
/// become free).
fn in_cones(prog: &ConicProgram, v: &[f64], dual: bool, tol: f64) -> bool {
    let mut off = 0;
    for cone in &prog.cones {
        let d = cone.dim();
        let block = &v[off..off + d];
        off += d;
        if dual && matches!(cone, Cone::Zero(_)) {
            continue;
        }
        if cone_violation(cone, block) > tol {
            return false;
        }
    }
    true
}
