//! Per-cone algebra: Jordan products, Nesterov-Todd scalings, step lengths.
//!
//! The solver only sees three kinds of blocks. Equality rows are split off
//! before the iteration starts and rotated cones are mapped onto Lorentz
//! cones by an orthogonal change of coordinates.

use faer::{Mat, Side};

use crate::program::Cone;

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Position of entry `(i, j)`, `i >= j`, in the scaled lower-triangular
/// vector of an order-`d` symmetric matrix.
pub fn svec_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * (2 * d - j + 1) / 2 + (i - j)
}

/// Order `d` such that `d (d + 1) / 2 = len`, if any.
pub fn svec_order(len: usize) -> Option<usize> {
    let d = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (d * (d + 1) / 2 == len).then_some(d)
}

pub fn svec_to_mat(v: &[f64], d: usize) -> Mat<f64> {
    let mut m = Mat::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / SQRT2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

pub fn mat_to_svec(m: &Mat<f64>, out: &mut [f64]) {
    let d = m.nrows();
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            out[k] = if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)]) * SQRT2
            };
            k += 1;
        }
    }
}

fn min_eigenvalue(m: &Mat<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    match m.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) => ev.into_iter().fold(f64::INFINITY, f64::min),
        Err(_) => f64::NAN,
    }
}

/// Smallest Jordan eigenvalue of `x` negated: how far `x` has to be pushed
/// along the cone identity to reach the boundary. Non-positive iff `x` is
/// in the cone.
pub(crate) fn boundary_shift(kind: &Kind, x: &[f64]) -> f64 {
    match kind {
        Kind::NonNeg => -x.iter().copied().fold(f64::INFINITY, f64::min),
        Kind::Soc => norm(&x[1..]) - x[0],
        Kind::Psd(d) => -min_eigenvalue(&svec_to_mat(x, *d)),
    }
}

/// Violation of membership in a user-facing cone (0 when inside).
pub fn cone_violation(cone: &Cone, s: &[f64]) -> f64 {
    match *cone {
        Cone::Zero(_) => s.iter().fold(0.0, |m, v| m.max(v.abs())),
        Cone::NonNeg(_) => boundary_shift(&Kind::NonNeg, s).max(0.0),
        Cone::Soc(_) => boundary_shift(&Kind::Soc, s).max(0.0),
        Cone::RotatedSoc(_) => {
            let mut t = s.to_vec();
            rotate_pair(&mut t);
            boundary_shift(&Kind::Soc, &t).max(0.0)
        }
        Cone::Psd(d) => {
            let v = boundary_shift(&Kind::Psd(d), s);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v.max(0.0)
            }
        }
    }
}

/// Maps `(u, v, ...)` to `((u + v)/sqrt2, (u - v)/sqrt2, ...)`. The map is
/// symmetric and orthogonal, so it is its own inverse and carries the
/// rotated cone onto the Lorentz cone.
pub(crate) fn rotate_pair(x: &mut [f64]) {
    let (u, v) = (x[0], x[1]);
    x[0] = (u + v) / SQRT2;
    x[1] = (u - v) / SQRT2;
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Cone kinds the interior-point iteration works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    NonNeg,
    Soc,
    Psd(usize),
}

impl Kind {
    pub(crate) fn degree(&self, dim: usize) -> usize {
        match *self {
            Kind::NonNeg => dim,
            Kind::Soc => 1,
            Kind::Psd(d) => d,
        }
    }

    pub(crate) fn identity(&self, out: &mut [f64]) {
        out.fill(0.0);
        match *self {
            Kind::NonNeg => out.fill(1.0),
            Kind::Soc => out[0] = 1.0,
            Kind::Psd(d) => {
                for i in 0..d {
                    out[svec_index(d, i, i)] = 1.0;
                }
            }
        }
    }

    /// Jordan product `u o v`.
    pub(crate) fn jordan(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        match *self {
            Kind::NonNeg => {
                for i in 0..u.len() {
                    out[i] = u[i] * v[i];
                }
            }
            Kind::Soc => {
                out[0] = dot(u, v);
                for i in 1..u.len() {
                    out[i] = u[0] * v[i] + v[0] * u[i];
                }
            }
            Kind::Psd(d) => {
                let a = svec_to_mat(u, d);
                let b = svec_to_mat(v, d);
                let ab = &a * &b;
                let sym = Mat::from_fn(d, d, |i, j| 0.5 * (ab[(i, j)] + ab[(j, i)]));
                mat_to_svec(&sym, out);
            }
        }
    }
}

/// Nesterov-Todd scaling of one block, with `lambda = W z = W^{-T} s`.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    /// `W = diag(w)`.
    NonNeg { w: Vec<f64> },
    /// `W = eta (2 v v' - J)` with `v' J v = 1`.
    Soc { eta: f64, v: Vec<f64> },
    /// `W(Z) = r' Z r`; `lambda` is diagonal with entries `l`.
    Psd { r: Mat<f64>, rinv: Mat<f64>, l: Vec<f64> },
}

fn lorentz_norm(x: &[f64]) -> f64 {
    let q = x[0] * x[0] - dot(&x[1..], &x[1..]);
    if q > 0.0 {
        q.sqrt()
    } else {
        f64::NAN
    }
}

impl Scaling {
    /// Computes the scaling and `lambda` for interior `s`, `z`. Returns
    /// `None` when either point has numerically left the cone interior.
    pub(crate) fn compute(kind: &Kind, s: &[f64], z: &[f64], lambda: &mut [f64]) -> Option<Self> {
        match *kind {
            Kind::NonNeg => {
                let mut w = Vec::with_capacity(s.len());
                for i in 0..s.len() {
                    if !(s[i] > 0.0 && z[i] > 0.0) {
                        return None;
                    }
                    w.push((s[i] / z[i]).sqrt());
                    lambda[i] = (s[i] * z[i]).sqrt();
                }
                Some(Scaling::NonNeg { w })
            }
            Kind::Soc => {
                let sn = lorentz_norm(s);
                let zn = lorentz_norm(z);
                if !(sn > 0.0 && zn > 0.0) {
                    return None;
                }
                let n = s.len();
                let sb: Vec<f64> = s.iter().map(|v| v / sn).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / zn).collect();
                let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
                let mut v = vec![0.0; n];
                v[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                for i in 1..n {
                    v[i] = (sb[i] - zb[i]) / (2.0 * gamma);
                }
                // v <- (wbar + e) / sqrt(2 (wbar_0 + 1))
                let f = 1.0 / (2.0 * (v[0] + 1.0)).sqrt();
                v[0] += 1.0;
                for vi in v.iter_mut() {
                    *vi *= f;
                }
                let eta = (sn / zn).sqrt();
                let sc = Scaling::Soc { eta, v };
                sc.apply_w(z, lambda);
                Some(sc)
            }
            Kind::Psd(d) => {
                let sm = svec_to_mat(s, d);
                let zm = svec_to_mat(z, d);
                let ls = sm.llt(Side::Lower).ok()?;
                let lz = zm.llt(Side::Lower).ok()?;
                let ls = ls.L().to_owned();
                let lz = lz.L().to_owned();
                let m = lz.transpose() * &ls;
                let svd = m.svd().ok()?;
                let sig: Vec<f64> = (0..d).map(|i| svd.S()[i]).collect();
                if sig.iter().any(|v| !(*v > 0.0)) {
                    return None;
                }
                let u = svd.U();
                let vv = svd.V();
                // r = Ls V S^{-1/2},  r^{-1} = S^{-1/2} U' Lz'
                let mut r = &ls * vv;
                for j in 0..d {
                    let f = 1.0 / sig[j].sqrt();
                    for i in 0..d {
                        r[(i, j)] *= f;
                    }
                }
                let mut rinv = u.transpose() * lz.transpose();
                for i in 0..d {
                    let f = 1.0 / sig[i].sqrt();
                    for j in 0..d {
                        rinv[(i, j)] *= f;
                    }
                }
                lambda.fill(0.0);
                for i in 0..d {
                    lambda[svec_index(d, i, i)] = sig[i];
                }
                Some(Scaling::Psd { r, rinv, l: sig })
            }
        }
    }

    /// `out = W x`
    pub(crate) fn apply_w(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w } => {
                for i in 0..x.len() {
                    out[i] = w[i] * x[i];
                }
            }
            Scaling::Soc { eta, v } => {
                // eta (2 v (v'x) - J x)
                let vx = dot(v, x);
                out[0] = eta * (2.0 * v[0] * vx - x[0]);
                for i in 1..x.len() {
                    out[i] = eta * (2.0 * v[i] * vx + x[i]);
                }
            }
            Scaling::Psd { r, .. } => congruence(r, x, true, out),
        }
    }

    /// `out = W^{-1} x`
    pub(crate) fn apply_w_inv(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w } => {
                for i in 0..x.len() {
                    out[i] = x[i] / w[i];
                }
            }
            Scaling::Soc { eta, v } => {
                // (1/eta) (2 Jv (Jv)'x - J x)
                let mut jvx = v[0] * x[0];
                for i in 1..x.len() {
                    jvx -= v[i] * x[i];
                }
                out[0] = (2.0 * v[0] * jvx - x[0]) / eta;
                for i in 1..x.len() {
                    out[i] = (-2.0 * v[i] * jvx + x[i]) / eta;
                }
            }
            Scaling::Psd { rinv, .. } => congruence(rinv, x, true, out),
        }
    }

    /// `out = W' x`
    pub(crate) fn apply_wt(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Psd { r, .. } => congruence(r, x, false, out),
            _ => self.apply_w(x, out),
        }
    }

    /// `out = W^{-T} x`
    pub(crate) fn apply_wt_inv(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Psd { rinv, .. } => congruence(rinv, x, false, out),
            _ => self.apply_w_inv(x, out),
        }
    }
}

/// `svec(R' X R)` when `transpose_left`, else `svec(R X R')`.
fn congruence(r: &Mat<f64>, x: &[f64], transpose_left: bool, out: &mut [f64]) {
    let d = r.nrows();
    let xm = svec_to_mat(x, d);
    let y = if transpose_left {
        r.transpose() * &xm * r
    } else {
        r * &xm * r.transpose()
    };
    mat_to_svec(&y, out);
}

/// `x` such that `lambda o x = d`, with `lambda` the scaled point of `sc`.
pub(crate) fn jordan_div(kind: &Kind, sc: &Scaling, lambda: &[f64], d: &[f64], out: &mut [f64]) {
    match (kind, sc) {
        (Kind::NonNeg, _) => {
            for i in 0..d.len() {
                out[i] = d[i] / lambda[i];
            }
        }
        (Kind::Soc, _) => {
            let l0 = lambda[0];
            let det = l0 * l0 - dot(&lambda[1..], &lambda[1..]);
            let x0 = (l0 * d[0] - dot(&lambda[1..], &d[1..])) / det;
            out[0] = x0;
            for i in 1..d.len() {
                out[i] = (d[i] - x0 * lambda[i]) / l0;
            }
        }
        (Kind::Psd(n), Scaling::Psd { l, .. }) => {
            let n = *n;
            for j in 0..n {
                for i in j..n {
                    let k = svec_index(n, i, j);
                    out[k] = 2.0 * d[k] / (l[i] + l[j]);
                }
            }
        }
        _ => unreachable!("scaling kind mismatch"),
    }
}

/// Largest `alpha` with `lambda + alpha * dir` in the cone, where `lambda`
/// is the scaled point of `sc` (interior). Returns infinity when unbounded.
pub(crate) fn max_step_scaled(kind: &Kind, sc: &Scaling, lambda: &[f64], dir: &[f64]) -> f64 {
    match (kind, sc) {
        (Kind::NonNeg, _) => {
            let mut a = f64::INFINITY;
            for i in 0..dir.len() {
                if dir[i] < 0.0 {
                    a = a.min(-lambda[i] / dir[i]);
                }
            }
            a
        }
        (Kind::Soc, _) => soc_step(lambda, dir),
        (Kind::Psd(n), Scaling::Psd { l, .. }) => {
            let n = *n;
            let dm = svec_to_mat(dir, n);
            let m = Mat::from_fn(n, n, |i, j| dm[(i, j)] / (l[i] * l[j]).sqrt());
            let lmin = min_eigenvalue(&m);
            if lmin.is_nan() {
                0.0
            } else if lmin < 0.0 {
                -1.0 / lmin
            } else {
                f64::INFINITY
            }
        }
        _ => unreachable!("scaling kind mismatch"),
    }
}

/// Largest step from an interior point `x` of the Lorentz cone along `d`.
pub(crate) fn soc_step(x: &[f64], d: &[f64]) -> f64 {
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = x[0] * d[0] - dot(&x[1..], &d[1..]);
    let c = x[0] * x[0] - dot(&x[1..], &x[1..]);
    if c <= 0.0 {
        return 0.0;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let denom = -b + disc.sqrt();
    if denom > 0.0 {
        c / denom
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc_point(n: usize, seed: u64) -> Vec<f64> {
        let mut x: Vec<f64> = (0..n)
            .map(|i| (((i as u64 + 1) * 2654435761 ^ seed) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        x[0] = norm(&x[1..]) + 0.3;
        x
    }

    #[test]
    fn svec_roundtrip_and_index() {
        let d = 4;
        let v: Vec<f64> = (0..10).map(|i| i as f64 + 1.0).collect();
        let m = svec_to_mat(&v, d);
        let mut w = vec![0.0; 10];
        mat_to_svec(&m, &mut w);
        for (a, b) in v.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(svec_index(d, 0, 0), 0);
        assert_eq!(svec_index(d, 3, 0), 3);
        assert_eq!(svec_index(d, 1, 1), 4);
        assert_eq!(svec_index(d, 3, 3), 9);
        assert_eq!(svec_order(10), Some(4));
        assert_eq!(svec_order(7), None);
    }

    #[test]
    fn soc_scaling_maps_both_points_to_lambda() {
        let s = soc_point(5, 3);
        let z = soc_point(5, 11);
        let mut lambda = vec![0.0; 5];
        let sc = Scaling::compute(&Kind::Soc, &s, &z, &mut lambda).unwrap();
        let mut ws = vec![0.0; 5];
        sc.apply_wt_inv(&s, &mut ws);
        for i in 0..5 {
            assert!((ws[i] - lambda[i]).abs() < 1e-10, "{ws:?} vs {lambda:?}");
        }
        let mut back = vec![0.0; 5];
        let mut tmp = vec![0.0; 5];
        sc.apply_w(&z, &mut tmp);
        sc.apply_w_inv(&tmp, &mut back);
        for i in 0..5 {
            assert!((back[i] - z[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn psd_scaling_maps_both_points_to_lambda() {
        let d = 3;
        let a = Mat::from_fn(d, d, |i, j| ((i * 3 + j * 7) % 5) as f64 - 2.0);
        let s_m = &a * a.transpose() + Mat::<f64>::identity(d, d);
        let b = Mat::from_fn(d, d, |i, j| ((i * 5 + j * 2) % 7) as f64 - 3.0);
        let z_m = &b * b.transpose() + Mat::<f64>::identity(d, d) * 0.5;
        let mut s = vec![0.0; 6];
        let mut z = vec![0.0; 6];
        mat_to_svec(&s_m, &mut s);
        mat_to_svec(&z_m, &mut z);
        let mut lambda = vec![0.0; 6];
        let sc = Scaling::compute(&Kind::Psd(d), &s, &z, &mut lambda).unwrap();
        let mut wz = vec![0.0; 6];
        let mut ws = vec![0.0; 6];
        sc.apply_w(&z, &mut wz);
        sc.apply_wt_inv(&s, &mut ws);
        for i in 0..6 {
            assert!((wz[i] - lambda[i]).abs() < 1e-9, "{wz:?} {lambda:?}");
            assert!((ws[i] - lambda[i]).abs() < 1e-9, "{ws:?} {lambda:?}");
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let l = soc_point(4, 5);
        let d = vec![0.3, -0.2, 0.5, 1.0];
        let mut x = vec![0.0; 4];
        let sc = Scaling::NonNeg { w: vec![] };
        jordan_div(&Kind::Soc, &sc, &l, &d, &mut x);
        let mut back = vec![0.0; 4];
        Kind::Soc.jordan(&l, &x, &mut back);
        for i in 0..4 {
            assert!((back[i] - d[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn soc_step_hits_boundary() {
        let x = [2.0, 0.0, 0.0];
        let d = [0.0, 1.0, 0.0];
        assert!((soc_step(&x, &d) - 2.0).abs() < 1e-12);
        assert!(soc_step(&x, &[1.0, 0.0, 0.0]).is_infinite());
        // straight towards the apex
        assert!((soc_step(&x, &[-1.0, 0.0, 0.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn violation_of_rotated_cone() {
        assert_eq!(cone_violation(&Cone::RotatedSoc(3), &[1.0, 0.5, 1.0]), 0.0);
        assert!(cone_violation(&Cone::RotatedSoc(3), &[1.0, 0.5, 1.1]) > 0.0);
        assert!(cone_violation(&Cone::Psd(2), &[1.0, 0.0, -1.0]) > 0.99);
    }
}
