//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling.

use std::time::{Duration, Instant};

use crate::cone::{boundary_shift, dot, jordan_div, max_step_scaled, norm, rotate_pair, Kind, Scaling};
use crate::error::ConicError;
use crate::kkt::{Block, Kkt};
use crate::program::{Cone, ConicProgram, CscMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Relative tolerance on residuals and duality gap.
    pub tol: f64,
    pub max_iters: usize,
    /// Largest PSD block order accepted.
    pub psd_cap: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 100,
            psd_cap: 200,
        }
    }
}

impl Settings {
    pub fn with_tol(tol: f64, max_iters: usize) -> Self {
        Self {
            tol,
            max_iters,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIters,
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::PrimalInfeasible => "primal-infeasible",
            Status::DualInfeasible => "dual-infeasible",
            Status::MaxIters => "max-iters",
            Status::NumericalFailure => "numerical-failure",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of [`solve`].
///
/// On `Optimal` `x`, `s`, `y` are the primal point, slack and dual
/// multipliers. On `MaxIters`/`NumericalFailure` they hold the iterate with
/// the smallest residuals seen, and the residual fields describe it. On
/// `PrimalInfeasible`, `y` is a ray with `A'y = 0`, `b'y = -1`, `y in K*`
/// and `x` is zero. On `DualInfeasible`, `x` is a ray with `c'x = -1`,
/// `-Ax in K` and `y` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    /// Primal objective including the program offset.
    pub objective: f64,
    /// Dual objective `-b'y` including the program offset.
    pub dual_objective: f64,
    /// `||Ax + s - b||` relative to `max(1, ||b||, || |A| |x| ||)`, worst of
    /// the equality and cone rows.
    pub primal_residual: f64,
    /// `||c + A'y||` relative to `max(1, ||c||, || |A|' |y| ||)`.
    pub dual_residual: f64,
    /// Complementarity `s'z` at the returned point.
    pub gap: f64,
    pub iterations: usize,
    pub solve_time: Duration,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// True when the returned primal-dual point has residuals and gap (absolute
    /// or relative to the objective) within `tol`, whatever the status. Never
    /// true for infeasibility certificates.
    pub fn accurate_to(&self, tol: f64) -> bool {
        let point = !matches!(self.status, Status::PrimalInfeasible | Status::DualInfeasible);
        point
            && self.primal_residual <= tol
            && self.dual_residual <= tol
            && (self.gap <= tol || self.gap <= tol * self.objective.abs())
    }
}

/// Program split into equality rows and a product of symmetric cones, with
/// rotated cones mapped onto Lorentz cones.
struct Prepared {
    n: usize,
    c: Vec<f64>,
    a: CscMatrix,
    b: Vec<f64>,
    g: CscMatrix,
    h: Vec<f64>,
    blocks: Vec<Block>,
    /// Original row of every equality row.
    eq_rows: Vec<usize>,
    /// Original row of every cone row.
    cone_rows: Vec<usize>,
    /// Offsets (in cone rows) of blocks that came from rotated cones.
    rotated: Vec<usize>,
    /// Equilibration: `x = d x~ / bs`, `y = ea y~ / cs`, `z = eg z~ / cs`.
    d: Vec<f64>,
    ea: Vec<f64>,
    eg: Vec<f64>,
    cs: f64,
    bs: f64,
}

/// Ruiz equilibration of `[A; G]`. Rows of one cone block share a factor so
/// the cone is preserved.
fn equilibrate(
    n: usize,
    a_trip: &[(usize, usize, f64)],
    g_trip: &[(usize, usize, f64)],
    p: usize,
    m: usize,
    block_of: &[usize],
    nblocks: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut d = vec![1.0; n];
    let mut ea = vec![1.0; p];
    let mut eg = vec![1.0; m];
    let clamp = |v: f64| if v > 1e-8 { v.min(1e8) } else { 1.0 };
    for _ in 0..20 {
        let mut col = vec![0.0f64; n];
        let mut ra = vec![0.0f64; p];
        let mut rb = vec![0.0f64; nblocks];
        for &(r, c, v) in a_trip {
            let x = (ea[r] * v * d[c]).abs();
            col[c] = col[c].max(x);
            ra[r] = ra[r].max(x);
        }
        for &(r, c, v) in g_trip {
            let x = (eg[r] * v * d[c]).abs();
            col[c] = col[c].max(x);
            rb[block_of[r]] = rb[block_of[r]].max(x);
        }
        let mut worst = 0.0f64;
        for v in col.iter().chain(&ra).chain(&rb) {
            if *v > 0.0 {
                worst = worst.max((1.0 - v).abs());
            }
        }
        if worst < 1e-2 {
            break;
        }
        for c in 0..n {
            d[c] /= clamp(col[c]).sqrt();
        }
        for r in 0..p {
            ea[r] /= clamp(ra[r]).sqrt();
        }
        for r in 0..m {
            eg[r] /= clamp(rb[block_of[r]]).sqrt();
        }
    }
    (d, ea, eg)
}

fn merge_rows(u: &[(usize, f64)], v: &[(usize, f64)], su: f64, sv: f64) -> Vec<(usize, f64)> {
    let mut map = std::collections::BTreeMap::new();
    for &(c, x) in u {
        *map.entry(c).or_insert(0.0) += su * x;
    }
    for &(c, x) in v {
        *map.entry(c).or_insert(0.0) += sv * x;
    }
    map.into_iter().filter(|&(_, x)| x != 0.0).collect()
}

fn prepare(prog: &ConicProgram, settings: &Settings) -> Result<Prepared, ConicError> {
    prog.validate()?;
    for cone in &prog.cones {
        if let Cone::Psd(order) = *cone {
            if order > settings.psd_cap {
                return Err(ConicError::PsdTooLarge {
                    order,
                    cap: settings.psd_cap,
                });
            }
        }
    }
    let n = prog.num_vars();
    let rows = prog.a.rows();
    let mut eq_rows = Vec::new();
    let mut cone_rows = Vec::new();
    let mut kinds = Vec::new();
    let mut rotated = Vec::new();
    let mut off = 0;
    for cone in &prog.cones {
        let d = cone.dim();
        match *cone {
            Cone::Zero(_) => eq_rows.extend(off..off + d),
            _ => {
                let kind = match *cone {
                    Cone::NonNeg(_) => Kind::NonNeg,
                    Cone::Soc(_) | Cone::RotatedSoc(_) => Kind::Soc,
                    Cone::Psd(order) => Kind::Psd(order),
                    Cone::Zero(_) => unreachable!(),
                };
                if matches!(cone, Cone::RotatedSoc(_)) {
                    rotated.push(cone_rows.len());
                }
                kinds.push((kind, cone_rows.len(), d));
                cone_rows.extend(off..off + d);
            }
        }
        off += d;
    }

    let mut a_trip = Vec::new();
    let mut b = Vec::with_capacity(eq_rows.len());
    for (i, &r) in eq_rows.iter().enumerate() {
        for &(c, v) in &rows[r] {
            a_trip.push((i, c, v));
        }
        b.push(prog.b[r]);
    }
    let mut g_rows: Vec<Vec<(usize, f64)>> = cone_rows.iter().map(|&r| rows[r].clone()).collect();
    let mut h: Vec<f64> = cone_rows.iter().map(|&r| prog.b[r]).collect();
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    for &k in &rotated {
        let u = merge_rows(&g_rows[k], &g_rows[k + 1], r2, r2);
        let v = merge_rows(&g_rows[k], &g_rows[k + 1], r2, -r2);
        g_rows[k] = u;
        g_rows[k + 1] = v;
        rotate_pair(&mut h[k..]);
    }
    let mut g_trip = Vec::new();
    for (i, row) in g_rows.iter().enumerate() {
        for &(c, v) in row {
            g_trip.push((i, c, v));
        }
    }
    let p = eq_rows.len();
    let m = cone_rows.len();
    let mut block_of = vec![0; m];
    let mut nblocks = 0;
    for &(kind, offset, dim) in &kinds {
        if kind == Kind::NonNeg {
            for (i, slot) in block_of[offset..offset + dim].iter_mut().enumerate() {
                *slot = nblocks + i;
            }
            nblocks += dim;
        } else {
            block_of[offset..offset + dim].fill(nblocks);
            nblocks += 1;
        }
    }
    let (d, ea, eg) = equilibrate(n, &a_trip, &g_trip, p, m, &block_of, nblocks);
    for t in a_trip.iter_mut() {
        t.2 *= ea[t.0] * d[t.1];
    }
    for t in g_trip.iter_mut() {
        t.2 *= eg[t.0] * d[t.1];
    }
    let mut c: Vec<f64> = prog.c.iter().zip(&d).map(|(c, d)| c * d).collect();
    for (bi, e) in b.iter_mut().zip(&ea) {
        *bi *= e;
    }
    for (hi, e) in h.iter_mut().zip(&eg) {
        *hi *= e;
    }
    let unit = |v: f64| if v > 0.0 { 1.0 / v.clamp(1e-4, 1e4) } else { 1.0 };
    let cs = unit(c.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let bs = unit(b.iter().chain(&h).fold(0.0f64, |m, v| m.max(v.abs())));
    c.iter_mut().for_each(|v| *v *= cs);
    b.iter_mut().for_each(|v| *v *= bs);
    h.iter_mut().for_each(|v| *v *= bs);
    let a = CscMatrix::from_triplets(p, n, &a_trip)?;
    let g = CscMatrix::from_triplets(m, n, &g_trip)?;
    let g_rows = g.rows();
    let blocks = kinds
        .into_iter()
        .map(|(kind, offset, dim)| Block::new(kind, offset, dim, &g_rows))
        .collect();
    Ok(Prepared {
        n,
        c,
        a,
        b,
        g,
        h,
        blocks,
        eq_rows,
        cone_rows,
        rotated,
        d,
        ea,
        eg,
        cs,
        bs,
    })
}

/// Adds `(1 + shift) e` when `v` is not safely interior.
fn push_interior(blocks: &[Block], v: &mut [f64]) {
    let mut shift = f64::NEG_INFINITY;
    for b in blocks {
        shift = shift.max(boundary_shift(&b.kind, &v[b.offset..b.offset + b.dim]));
    }
    if !shift.is_finite() && shift.is_sign_negative() {
        return;
    }
    let nv = norm(v).max(1.0);
    if shift.is_nan() || shift >= -1e-8 * nv {
        let shift = if shift.is_nan() { nv } else { shift };
        let mut e = vec![0.0; v.len()];
        for b in blocks {
            b.kind.identity(&mut e[b.offset..b.offset + b.dim]);
        }
        for (vi, ei) in v.iter_mut().zip(&e) {
            *vi += (1.0 + shift) * ei;
        }
    }
}

/// Solves `prog` with the bundled interior-point method.
///
/// Deterministic: identical program and settings give an identical iterate
/// path.
pub fn solve(prog: &ConicProgram, settings: &Settings) -> Result<SolveResult, ConicError> {
    let start = Instant::now();
    let pp = prepare(prog, settings)?;
    let n = pp.n;
    let p = pp.a.nrows;
    let m = pp.g.nrows;
    let blocks = &pp.blocks;
    let kkt = Kkt {
        n,
        a: &pp.a,
        g: &pp.g,
        blocks,
    };
    let nu: usize = blocks.iter().map(|b| b.kind.degree(b.dim)).sum();
    let tol = settings.tol;

    let resx0 = norm(&prog.c).max(1.0);
    let (b_eq, h_cone) = {
        let b_eq: Vec<f64> = pp.eq_rows.iter().map(|&r| prog.b[r]).collect();
        let h_cone: Vec<f64> = pp.cone_rows.iter().map(|&r| prog.b[r]).collect();
        (b_eq, h_cone)
    };
    let resy0 = norm(&b_eq).max(1.0);
    let resz0 = norm(&h_cone).max(1.0);
    let (cs, bs) = (pp.cs, pp.bs);
    // norms of residuals mapped back to user coordinates
    let dnorm = |v: &[f64]| wnorm(v, &pp.d) / cs;
    let anorm = |v: &[f64]| wnorm(v, &pp.ea) / bs;
    let gnorm = |v: &[f64]| wnorm(v, &pp.eg) / bs;

    let mut x;
    let mut y;
    let mut z;
    let mut s;
    let mut tau = 1.0;
    let mut kappa = 1.0;

    // Initial point from two least-norm solves with W = I.
    let unit: Vec<Scaling> = blocks
        .iter()
        .map(|b| {
            let mut e = vec![0.0; b.dim];
            b.kind.identity(&mut e);
            let mut lam = vec![0.0; b.dim];
            Scaling::compute(&b.kind, &e, &e, &mut lam).expect("identity is interior")
        })
        .collect();
    let f0 = match kkt.factor(&unit) {
        Some(f) => f,
        None => {
            return Ok(failure(prog, &pp, start, 0, Status::NumericalFailure));
        }
    };
    {
        let zero_n = vec![0.0; n];
        let (px, _, pz) = kkt.solve(&f0, &unit, &zero_n, &pp.b, &pp.h);
        x = px;
        s = pz.iter().map(|v| -v).collect::<Vec<_>>();
        let neg_c: Vec<f64> = pp.c.iter().map(|v| -v).collect();
        let (_, dy, dz) = kkt.solve(&f0, &unit, &neg_c, &vec![0.0; p], &vec![0.0; m]);
        y = dy;
        z = dz;
    }
    push_interior(blocks, &mut s);
    push_interior(blocks, &mut z);

    let status;
    let mut iters = 0;
    let mut lambda = vec![0.0; m];
    let mut scalings: Vec<Scaling> = Vec::with_capacity(blocks.len());
    let mut info;
    // (merit, x, y, z, s, tau, info) of the best iterate seen
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, (f64, f64, f64))> = None;

    loop {
        // residuals
        let mut rx: Vec<f64> = pp.c.iter().map(|v| v * tau).collect();
        pp.a.tr_mul_add(1.0, &y, &mut rx);
        pp.g.tr_mul_add(1.0, &z, &mut rx);
        let mut ry: Vec<f64> = pp.b.iter().map(|v| v * tau).collect();
        pp.a.mul_add(-1.0, &x, &mut ry);
        let mut rz: Vec<f64> = pp.h.iter().zip(&s).map(|(h, s)| s - h * tau).collect();
        pp.g.mul_add(1.0, &x, &mut rz);
        // magnitudes of the terms that cancel in each residual
        let ax = pp.a.abs_mul(&x);
        let gx = pp.g.abs_mul(&x);
        let atyz: Vec<f64> =
            pp.a.abs_tr_mul(&y)
                .iter()
                .zip(pp.g.abs_tr_mul(&z))
                .map(|(u, v)| u + v)
                .collect();
        let cx = dot(&pp.c, &x);
        let by = dot(&pp.b, &y);
        let hz = dot(&pp.h, &z);
        let rt = kappa + cx + by + hz;
        let sz = dot(&s, &z);
        let mu = (sz + tau * kappa) / (nu as f64 + 1.0);

        let pres = (anorm(&ry) / resy0.max(anorm(&ax) / tau)).max(gnorm(&rz) / resz0.max(gnorm(&gx) / tau)) / tau;
        let dres = dnorm(&rx) / resx0.max(dnorm(&atyz) / tau) / tau;
        let pcost = cx / (tau * cs * bs);
        let dcost = -(by + hz) / (tau * cs * bs);
        let gap = sz / (tau * tau * cs * bs);
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        info = (pres, dres, gap);

        if pres <= tol && dres <= tol && (gap <= tol || relgap <= tol) {
            status = Status::Optimal;
            break;
        }
        let merit = pres.max(dres).max(gap.min(relgap));
        if merit.is_finite() && best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone(), z.clone(), s.clone(), tau, info));
        }
        if by + hz < 0.0 {
            let mut aty = vec![0.0; n];
            pp.a.tr_mul_add(1.0, &y, &mut aty);
            pp.g.tr_mul_add(1.0, &z, &mut aty);
            let pinf = dnorm(&aty) * cs * bs / resx0 / -(by + hz);
            if pinf <= tol {
                status = Status::PrimalInfeasible;
                break;
            }
        }
        if cx < 0.0 {
            let mut ax = vec![0.0; p];
            pp.a.mul_add(1.0, &x, &mut ax);
            let mut gxs = s.clone();
            pp.g.mul_add(1.0, &x, &mut gxs);
            let dinf = (anorm(&ax) / resy0).max(gnorm(&gxs) / resz0) * bs * cs / -cx;
            if dinf <= tol {
                status = Status::DualInfeasible;
                break;
            }
        }
        if iters >= settings.max_iters {
            status = Status::MaxIters;
            break;
        }
        if ![tau, kappa, mu].iter().all(|v| v.is_finite()) {
            status = Status::NumericalFailure;
            break;
        }

        scalings.clear();
        let mut ok = true;
        for b in blocks {
            let r = b.offset..b.offset + b.dim;
            match Scaling::compute(&b.kind, &s[r.clone()], &z[r.clone()], &mut lambda[r]) {
                Some(sc) => scalings.push(sc),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            status = Status::NumericalFailure;
            break;
        }
        let fac = match kkt.factor(&scalings) {
            Some(f) => f,
            None => {
                status = Status::NumericalFailure;
                break;
            }
        };
        let neg_c: Vec<f64> = pp.c.iter().map(|v| -v).collect();
        let (x1, y1, z1) = kkt.solve(&fac, &scalings, &neg_c, &pp.b, &pp.h);
        let denom_base = dot(&pp.c, &x1) + dot(&pp.b, &y1) + dot(&pp.h, &z1);

        // One Newton solve for a given target `ds_target` (in lambda space)
        // and `dk_target`, returning (dx, dy, dz, ds, dtau, dkappa, ds_scaled,
        // dz_scaled).
        let newton = |eta: f64, ds_target: &[f64], dk_target: f64| {
            let mut ldiv = vec![0.0; m];
            let mut wt_ldiv = vec![0.0; m];
            for (b, sc) in blocks.iter().zip(&scalings) {
                let r = b.offset..b.offset + b.dim;
                jordan_div(
                    &b.kind,
                    sc,
                    &lambda[r.clone()],
                    &ds_target[r.clone()],
                    &mut ldiv[r.clone()],
                );
                sc.apply_wt(&ldiv[r.clone()], &mut wt_ldiv[r]);
            }
            let r1: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let r2: Vec<f64> = ry.iter().map(|v| eta * v).collect();
            let r3: Vec<f64> = rz.iter().zip(&wt_ldiv).map(|(v, w)| -eta * v - w).collect();
            let (x2, y2, z2) = kkt.solve(&fac, &scalings, &r1, &r2, &r3);
            let num = -eta * rt - dk_target / tau - (dot(&pp.c, &x2) + dot(&pp.b, &y2) + dot(&pp.h, &z2));
            let dtau = num / (denom_base - kappa / tau);
            let dx: Vec<f64> = x2.iter().zip(&x1).map(|(a, b)| a + dtau * b).collect();
            let dy: Vec<f64> = y2.iter().zip(&y1).map(|(a, b)| a + dtau * b).collect();
            let dz: Vec<f64> = z2.iter().zip(&z1).map(|(a, b)| a + dtau * b).collect();
            let mut dz_sc = vec![0.0; m];
            let mut ds_sc = vec![0.0; m];
            let mut ds = vec![0.0; m];
            for (b, sc) in blocks.iter().zip(&scalings) {
                let r = b.offset..b.offset + b.dim;
                sc.apply_w(&dz[r.clone()], &mut dz_sc[r.clone()]);
                for i in r.clone() {
                    ds_sc[i] = ldiv[i] - dz_sc[i];
                }
                sc.apply_wt(&ds_sc[r.clone()], &mut ds[r]);
            }
            let dkappa = (dk_target - kappa * dtau) / tau;
            (dx, dy, dz, ds, dtau, dkappa, ds_sc, dz_sc)
        };

        let max_step = |ds_sc: &[f64], dz_sc: &[f64], dtau: f64, dkappa: f64| {
            let mut a = f64::INFINITY;
            for (b, sc) in blocks.iter().zip(&scalings) {
                let r = b.offset..b.offset + b.dim;
                a = a.min(max_step_scaled(&b.kind, sc, &lambda[r.clone()], &ds_sc[r.clone()]));
                a = a.min(max_step_scaled(&b.kind, sc, &lambda[r.clone()], &dz_sc[r]));
            }
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // predictor
        let mut lsq = vec![0.0; m];
        for b in blocks {
            let r = b.offset..b.offset + b.dim;
            b.kind.jordan(&lambda[r.clone()], &lambda[r.clone()], &mut lsq[r]);
        }
        let ds_aff: Vec<f64> = lsq.iter().map(|v| -v).collect();
        let (_, _, _, _, dtau_a, dkappa_a, ds_sc_a, dz_sc_a) = newton(1.0, &ds_aff, -kappa * tau);
        let alpha_aff = max_step(&ds_sc_a, &dz_sc_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let mut e = vec![0.0; m];
        let mut corr = vec![0.0; m];
        for b in blocks {
            let r = b.offset..b.offset + b.dim;
            b.kind.identity(&mut e[r.clone()]);
            b.kind.jordan(&ds_sc_a[r.clone()], &dz_sc_a[r.clone()], &mut corr[r]);
        }
        let ds_target: Vec<f64> = (0..m).map(|i| -lsq[i] - corr[i] + sigma * mu * e[i]).collect();
        let dk_target = -kappa * tau - dtau_a * dkappa_a + sigma * mu;
        let (dx, dy, dz, ds, dtau, dkappa, ds_sc, dz_sc) = newton(1.0 - sigma, &ds_target, dk_target);
        let alpha = (0.99 * max_step(&ds_sc, &dz_sc, dtau, dkappa)).min(1.0);
        if !(alpha.is_finite() && alpha > 0.0) {
            status = Status::NumericalFailure;
            break;
        }
        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for i in 0..p {
            y[i] += alpha * dy[i];
        }
        for i in 0..m {
            z[i] += alpha * dz[i];
            s[i] += alpha * ds[i];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        iters += 1;
    }

    if matches!(status, Status::NumericalFailure | Status::MaxIters) {
        if let Some((_, bx, by, bz, bs_, btau, binfo)) = best {
            x = bx;
            y = by;
            z = bz;
            s = bs_;
            tau = btau;
            info = binfo;
        }
    }

    // Back to user coordinates.
    let (fx, fy, fs) = match status {
        Status::PrimalInfeasible => (0.0, -bs / (dot(&pp.b, &y) + dot(&pp.h, &z)), 0.0),
        Status::DualInfeasible => {
            let f = -cs / dot(&pp.c, &x);
            (f, 0.0, f)
        }
        _ => (1.0 / (tau * bs), 1.0 / (tau * cs), 1.0 / (tau * bs)),
    };
    let xs: Vec<f64> = x.iter().zip(&pp.d).map(|(v, d)| v * d * fx).collect();
    let ys: Vec<f64> = y.iter().zip(&pp.ea).map(|(v, e)| v * e * fy).collect();
    let zs: Vec<f64> = z.iter().zip(&pp.eg).map(|(v, e)| v * e * fy).collect();
    let ss: Vec<f64> = s.iter().zip(&pp.eg).map(|(v, e)| v / e * fs).collect();
    let (y_full, s_full) = to_user_rows(prog, &pp, &ys, &zs, &ss);
    let objective = prog.objective(&xs);
    let dual_objective = -dot(&prog.b, &y_full) + prog.offset;
    Ok(SolveResult {
        status,
        x: xs,
        s: s_full,
        y: y_full,
        objective,
        dual_objective,
        primal_residual: info.0,
        dual_residual: info.1,
        gap: info.2,
        iterations: iters,
        solve_time: start.elapsed(),
    })
}

/// `|| v ./ w ||`
fn wnorm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(v, w)| v / w).map(|v| v * v).sum::<f64>().sqrt()
}

fn to_user_rows(prog: &ConicProgram, pp: &Prepared, y_eq: &[f64], z: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut z = z.to_vec();
    let mut s = s.to_vec();
    for &k in &pp.rotated {
        rotate_pair(&mut z[k..]);
        rotate_pair(&mut s[k..]);
    }
    let mut y_full = vec![0.0; prog.num_rows()];
    let mut s_full = vec![0.0; prog.num_rows()];
    for (i, &r) in pp.eq_rows.iter().enumerate() {
        y_full[r] = y_eq[i];
    }
    for (i, &r) in pp.cone_rows.iter().enumerate() {
        y_full[r] = z[i];
        s_full[r] = s[i];
    }
    (y_full, s_full)
}

fn failure(prog: &ConicProgram, pp: &Prepared, start: Instant, iterations: usize, status: Status) -> SolveResult {
    SolveResult {
        status,
        x: vec![0.0; pp.n],
        s: prog.b.clone(),
        y: vec![0.0; prog.num_rows()],
        objective: prog.offset,
        dual_objective: prog.offset,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        iterations,
        solve_time: start.elapsed(),
    }
}
