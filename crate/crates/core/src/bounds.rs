//! Convex surrogates of the SINR constraint terms, as direct evaluators and
//! as coefficient maps over the real-stacked variables
//! `x = [Re w; Im w; Re phi; Im phi]`.

use crate::channel::{ProblemInstance, C64};
use crate::error::{Error, Result};
use crate::sysmodel::{effective_channel_unchecked, DesignPoint};

/// Index map of the real-stacked variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub k: usize,
    pub n_t: usize,
    pub n_s: usize,
}

impl Layout {
    pub fn of(inst: &ProblemInstance) -> Self {
        Self {
            k: inst.k,
            n_t: inst.n_t,
            n_s: inst.n_s,
        }
    }

    pub fn len(&self) -> usize {
        2 * (self.k * self.n_t + self.n_s)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn re_w(&self, l: usize, i: usize) -> usize {
        l * self.n_t + i
    }

    pub fn im_w(&self, l: usize, i: usize) -> usize {
        self.k * self.n_t + l * self.n_t + i
    }

    pub fn re_phi(&self, s: usize) -> usize {
        2 * self.k * self.n_t + s
    }

    pub fn im_phi(&self, s: usize) -> usize {
        2 * self.k * self.n_t + self.n_s + s
    }

    pub fn stack(&self, dp: &DesignPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for l in 0..self.k {
            for i in 0..self.n_t {
                let v = dp.w[l * self.n_t + i];
                x[self.re_w(l, i)] = v.re;
                x[self.im_w(l, i)] = v.im;
            }
        }
        for s in 0..self.n_s {
            x[self.re_phi(s)] = dp.phi[s].re;
            x[self.im_phi(s)] = dp.phi[s].im;
        }
        x
    }

    pub fn unstack(&self, x: &[f64], unit_modulus: bool) -> DesignPoint {
        let w = (0..self.k)
            .flat_map(|l| (0..self.n_t).map(move |i| (l, i)))
            .map(|(l, i)| C64::new(x[self.re_w(l, i)], x[self.im_w(l, i)]))
            .collect();
        let phi = (0..self.n_s)
            .map(|s| C64::new(x[self.re_phi(s)], x[self.im_phi(s)]))
            .collect();
        DesignPoint {
            k: self.k,
            n_t: self.n_t,
            w,
            phi,
            unit_modulus,
        }
    }
}

/// Iterate `(w^(n), phi^(n))` with cached `g_k^(n)`, `a_k = g_k w_k` and
/// `b_k = a_k g_k^H + w_k`.
#[derive(Debug, Clone)]
pub struct ExpansionPoint {
    pub point: DesignPoint,
    pub g: Vec<Vec<C64>>,
    pub a: Vec<C64>,
    pub b: Vec<Vec<C64>>,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conj(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `Re{x^H y}`.
fn re_inner(x: &[C64], y: &[C64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a.conj() * b).re).sum()
}

impl ExpansionPoint {
    pub fn new(inst: &ProblemInstance, point: &DesignPoint) -> Result<Self> {
        point.check_dims(inst)?;
        let mut g = Vec::with_capacity(inst.k);
        let mut a = Vec::with_capacity(inst.k);
        let mut b = Vec::with_capacity(inst.k);
        for k in 0..inst.k {
            let gk = effective_channel_unchecked(inst, &point.phi, k);
            let ak = dot(&gk, point.w_k(k));
            let bk = gk
                .iter()
                .zip(point.w_k(k))
                .map(|(gi, wi)| ak * gi.conj() + wi)
                .collect();
            g.push(gk);
            a.push(ak);
            b.push(bk);
        }
        Ok(Self {
            point: point.clone(),
            g,
            a,
            b,
        })
    }

    /// True iff the caches match a fresh computation to `1e-12` (relative).
    pub fn is_consistent(&self, inst: &ProblemInstance) -> bool {
        let Ok(fresh) = Self::new(inst, &self.point) else {
            return false;
        };
        let close = |x: &C64, y: &C64| (x - y).norm() <= 1e-12 * (1.0 + y.norm());
        self.a.iter().zip(&fresh.a).all(|(x, y)| close(x, y))
            && self
                .g
                .iter()
                .flatten()
                .zip(fresh.g.iter().flatten())
                .all(|(x, y)| close(x, y))
            && self
                .b
                .iter()
                .flatten()
                .zip(fresh.b.iter().flatten())
                .all(|(x, y)| close(x, y))
    }
}

/// `2 Re{y^H x} - ||y||^2`, a global minorant of `||x||^2` tight at `x = y`.
pub fn linearize_norm_sq(x: &[C64], y: &[C64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", x.len(), y.len())));
    }
    Ok(2.0 * re_inner(y, x) - norm_sq(y))
}

fn check_pair(inst: &ProblemInstance, dp: &DesignPoint, ep: &ExpansionPoint, k: usize, l: Option<usize>) -> Result<()> {
    dp.check_dims(inst)?;
    ep.point.check_dims(inst)?;
    if k >= inst.k {
        return Err(Error::Dimension(format!("user {k} out of range")));
    }
    if let Some(l) = l {
        if l >= inst.k {
            return Err(Error::Dimension(format!("user {l} out of range")));
        }
        if l == k {
            return Err(Error::InvalidArgument(format!(
                "interference term needs k != l, got {k}"
            )));
        }
    }
    Ok(())
}

/// Concave minorant of `|g_k w_k|^2`.
pub fn f_k(inst: &ProblemInstance, dp: &DesignPoint, ep: &ExpansionPoint, k: usize) -> Result<f64> {
    check_pair(inst, dp, ep, k, None)?;
    let gh = conj(&effective_channel_unchecked(inst, &dp.phi, k));
    let a = ep.a[k];
    let wk = dp.w_k(k);
    let plus: Vec<C64> = gh.iter().zip(wk).map(|(g, w)| a * g + w).collect();
    let minus: Vec<C64> = gh.iter().zip(wk).map(|(g, w)| a * g - w).collect();
    Ok(re_inner(&ep.b[k], &plus) - 0.5 * norm_sq(&ep.b[k]) - 0.5 * norm_sq(&minus) - a.norm_sqr())
}

/// `1/4 ||g^H + c w_l||^2 - 1/2 Re{y0^H (g^H - c w_l)} + 1/4 ||y0||^2` with
/// `y0 = g^(n)H - c w_l^(n)`; majorizes `Re{c^* ... }` for the four choices
/// of `c`.
fn upper(inst: &ProblemInstance, dp: &DesignPoint, ep: &ExpansionPoint, k: usize, l: usize, c: C64) -> f64 {
    let gh = conj(&effective_channel_unchecked(inst, &dp.phi, k));
    let gh0 = conj(&ep.g[k]);
    let wl = dp.w_k(l);
    let wl0 = ep.point.w_k(l);
    let plus: Vec<C64> = gh.iter().zip(wl).map(|(g, w)| g + c * w).collect();
    let minus: Vec<C64> = gh.iter().zip(wl).map(|(g, w)| g - c * w).collect();
    let y0: Vec<C64> = gh0.iter().zip(wl0).map(|(g, w)| g - c * w).collect();
    0.25 * norm_sq(&plus) - 0.5 * re_inner(&y0, &minus) + 0.25 * norm_sq(&y0)
}

/// Convex majorant of `Re{g_k w_l}`.
pub fn mu(inst: &ProblemInstance, dp: &DesignPoint, ep: &ExpansionPoint, k: usize, l: usize) -> Result<f64> {
    check_pair(inst, dp, ep, k, Some(l))?;
    Ok(upper(inst, dp, ep, k, l, SurrogateKind::Mu.coupling()))
}

/// Convex majorant of `-Re{g_k w_l}`.
pub fn mu_hat(inst: &ProblemInstance, dp: &DesignPoint, ep: &ExpansionPoint, k: usize, l: usize) -> Result<f64> {
    check_pair(inst, dp, ep, k, Some(l))?;
    Ok(upper(inst, dp, ep, k, l, SurrogateKind::MuHat.coupling()))
}

/// Convex majorant of `Im{g_k w_l}`.
pub fn nu(inst: &ProblemInstance, dp: &DesignPoint, ep: &ExpansionPoint, k: usize, l: usize) -> Result<f64> {
    check_pair(inst, dp, ep, k, Some(l))?;
    Ok(upper(inst, dp, ep, k, l, SurrogateKind::Nu.coupling()))
}

/// Convex majorant of `-Im{g_k w_l}`.
pub fn nu_hat(inst: &ProblemInstance, dp: &DesignPoint, ep: &ExpansionPoint, k: usize, l: usize) -> Result<f64> {
    check_pair(inst, dp, ep, k, Some(l))?;
    Ok(upper(inst, dp, ep, k, l, SurrogateKind::NuHat.coupling()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    F,
    Mu,
    MuHat,
    Nu,
    NuHat,
}

impl SurrogateKind {
    pub const INTERFERENCE: [SurrogateKind; 4] = [Self::Mu, Self::MuHat, Self::Nu, Self::NuHat];

    fn coupling(self) -> C64 {
        match self {
            Self::F | Self::Mu => C64::new(1.0, 0.0),
            Self::MuHat => C64::new(-1.0, 0.0),
            Self::Nu => C64::new(0.0, -1.0),
            Self::NuHat => C64::new(0.0, 1.0),
        }
    }
}

/// `coef . x + constant` over the real-stacked variables.
#[derive(Debug, Clone, PartialEq)]
pub struct RealAffine {
    pub coef: Vec<f64>,
    pub constant: f64,
}

impl RealAffine {
    pub fn zero(n: usize) -> Self {
        Self {
            coef: vec![0.0; n],
            constant: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    fn axpy(&mut self, a: f64, other: &RealAffine) {
        for (c, o) in self.coef.iter_mut().zip(&other.coef) {
            *c += a * o;
        }
        self.constant += a * other.constant;
    }

    fn scaled(&self, a: f64) -> Self {
        Self {
            coef: self.coef.iter().map(|c| c * a).collect(),
            constant: self.constant * a,
        }
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coef.iter().copied().enumerate().filter(|(_, v)| *v != 0.0)
    }
}

/// Complex scalar affine in `x`.
#[derive(Debug, Clone, PartialEq)]
struct ComplexAffine {
    re: RealAffine,
    im: RealAffine,
}

impl ComplexAffine {
    fn zero(n: usize) -> Self {
        Self {
            re: RealAffine::zero(n),
            im: RealAffine::zero(n),
        }
    }

    /// `self += c * other`.
    fn add_scaled(&mut self, c: C64, other: &ComplexAffine) {
        self.re.axpy(c.re, &other.re);
        self.re.axpy(-c.im, &other.im);
        self.im.axpy(c.im, &other.re);
        self.im.axpy(c.re, &other.im);
    }
}

/// `g_k^H` as a vector of complex-affine maps; it depends on `conj(phi)`.
fn g_herm_affine(inst: &ProblemInstance, lay: &Layout, k: usize) -> Vec<ComplexAffine> {
    let n = lay.len();
    (0..inst.n_t)
        .map(|i| {
            let mut c = ComplexAffine::zero(n);
            let h = inst.h_t.get(k, i).conj();
            c.re.constant = h.re;
            c.im.constant = h.im;
            for s in 0..inst.n_s {
                let alpha = (inst.h_s.get(k, s) * inst.h_ts.get(s, i)).conj();
                // alpha * conj(zr + j zi)
                c.re.coef[lay.re_phi(s)] += alpha.re;
                c.re.coef[lay.im_phi(s)] += alpha.im;
                c.im.coef[lay.re_phi(s)] += alpha.im;
                c.im.coef[lay.im_phi(s)] -= alpha.re;
            }
            c
        })
        .collect()
}

fn w_affine(lay: &Layout, l: usize) -> Vec<ComplexAffine> {
    let n = lay.len();
    (0..lay.n_t)
        .map(|i| {
            let mut c = ComplexAffine::zero(n);
            c.re.coef[lay.re_w(l, i)] = 1.0;
            c.im.coef[lay.im_w(l, i)] = 1.0;
            c
        })
        .collect()
}

/// `p * u + q * v` componentwise.
fn combine(p: C64, u: &[ComplexAffine], q: C64, v: &[ComplexAffine]) -> Vec<ComplexAffine> {
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let mut c = ComplexAffine::zero(a.re.coef.len());
            c.add_scaled(p, a);
            c.add_scaled(q, b);
            c
        })
        .collect()
}

/// `Re{y^H v}` for constant `y`.
fn re_inner_affine(y: &[C64], v: &[ComplexAffine]) -> RealAffine {
    let mut out = RealAffine::zero(v.first().map_or(0, |c| c.re.coef.len()));
    for (yi, vi) in y.iter().zip(v) {
        out.axpy(yi.re, &vi.re);
        out.axpy(yi.im, &vi.im);
    }
    out
}

fn parts(v: &[ComplexAffine], scale: f64) -> Vec<RealAffine> {
    v.iter()
        .flat_map(|c| [c.re.scaled(scale), c.im.scaled(scale)])
        .collect()
}

/// `affine(x) + sign * 1/2 ||quad(x)||^2`; `sign = -1` for the concave
/// minorant and `+1` for the convex majorants.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSurrogate {
    pub affine: RealAffine,
    pub sign: f64,
    pub quad: Vec<RealAffine>,
}

impl QuadraticSurrogate {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let q: f64 = self.quad.iter().map(|r| r.eval(x).powi(2)).sum();
        self.affine.eval(x) + self.sign * 0.5 * q
    }
}

/// Coefficient form of one surrogate. `l` must be `None` for `F` and a user
/// other than `k` for the interference bounds.
pub fn surrogate_coefficients(
    inst: &ProblemInstance,
    ep: &ExpansionPoint,
    k: usize,
    l: Option<usize>,
    which: SurrogateKind,
) -> Result<QuadraticSurrogate> {
    scaled_surrogate_coefficients(inst, ep, k, l, which, 1.0)
}

/// As [`surrogate_coefficients`], with the bilinear form `g w` split as
/// `(s g)(w / s)` before the bounds are taken. Every `s > 0` gives a valid
/// bound that is tight at the expansion point; `s = 1` is the plain form.
pub fn scaled_surrogate_coefficients(
    inst: &ProblemInstance,
    ep: &ExpansionPoint,
    k: usize,
    l: Option<usize>,
    which: SurrogateKind,
    s: f64,
) -> Result<QuadraticSurrogate> {
    let lay = Layout::of(inst);
    ep.point.check_dims(inst)?;
    if ep.g.len() != inst.k || k >= inst.k {
        return Err(Error::Dimension(format!(
            "user {k} out of range or stale expansion point"
        )));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "split factor must be positive, got {s}"
        )));
    }
    let gh = g_herm_affine(inst, &lay, k);
    let (sg, sw) = (C64::new(s, 0.0), C64::new(1.0 / s, 0.0));
    match (which, l) {
        (SurrogateKind::F, None) => {
            let a = ep.a[k];
            let wk = w_affine(&lay, k);
            let plus = combine(sg * a, &gh, sw, &wk);
            let minus = combine(sg * a, &gh, -sw, &wk);
            let b: Vec<C64> = ep.g[k]
                .iter()
                .zip(ep.point.w_k(k))
                .map(|(g, w)| sg * a * g.conj() + sw * w)
                .collect();
            let mut affine = re_inner_affine(&b, &plus);
            affine.constant -= 0.5 * norm_sq(&b) + a.norm_sqr();
            Ok(QuadraticSurrogate {
                affine,
                sign: -1.0,
                quad: parts(&minus, 1.0),
            })
        }
        (SurrogateKind::F, Some(_)) => Err(Error::InvalidArgument("f surrogate takes no l".into())),
        (_, None) => Err(Error::InvalidArgument("interference surrogate needs l".into())),
        (kind, Some(l)) => {
            if l >= inst.k || l == k {
                return Err(Error::InvalidArgument(format!("invalid pair ({k}, {l})")));
            }
            let c = kind.coupling();
            let wl = w_affine(&lay, l);
            let plus = combine(sg, &gh, c * sw, &wl);
            let minus = combine(sg, &gh, -c * sw, &wl);
            let y0: Vec<C64> = ep.g[k]
                .iter()
                .zip(ep.point.w_k(l))
                .map(|(g, w)| sg * g.conj() - c * sw * w)
                .collect();
            let mut affine = re_inner_affine(&y0, &minus).scaled(-0.5);
            affine.constant += 0.25 * norm_sq(&y0);
            Ok(QuadraticSurrogate {
                affine,
                sign: 1.0,
                quad: parts(&plus, std::f64::consts::FRAC_1_SQRT_2),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::testutil::{random_instance, random_point};
    use crate::sysmodel::{effective_channel, DesignPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Eval = fn(&ProblemInstance, &DesignPoint, &ExpansionPoint, usize, usize) -> Result<f64>;

    fn targets(inst: &ProblemInstance, dp: &DesignPoint, k: usize, l: usize) -> [f64; 4] {
        let g = effective_channel(inst, &dp.phi, k).unwrap();
        let v = dot(&g, dp.w_k(l));
        [v.re, -v.re, v.im, -v.im]
    }

    const UPPER: [Eval; 4] = [mu, mu_hat, nu, nu_hat];

    #[test]
    fn linearization_examples() {
        let x = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.3)];
        assert!((linearize_norm_sq(&x, &x).unwrap() - norm_sq(&x)).abs() < 1e-15);
        assert_eq!(linearize_norm_sq(&x, &[C64::new(0.0, 0.0); 2]).unwrap(), 0.0);
        assert_eq!(
            linearize_norm_sq(&[C64::new(1.0, 0.0)], &[C64::new(2.0, 0.0)]).unwrap(),
            0.0
        );
        assert!(linearize_norm_sq(&x, &x[..1]).is_err());
    }

    #[test]
    fn polarization_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let j = C64::new(0.0, 1.0);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let x: Vec<C64> = (0..n).map(|_| C64::new(rng.random(), rng.random())).collect();
            let y: Vec<C64> = (0..n).map(|_| C64::new(rng.random(), rng.random())).collect();
            let ip: C64 = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
            let s = |c: C64| -> f64 { x.iter().zip(&y).map(|(a, b)| (a + c * b).norm_sqr()).sum() };
            let one = C64::new(1.0, 0.0);
            assert!((ip.re - 0.25 * (s(one) - s(-one))).abs() < 1e-12);
            assert!((ip.im - 0.25 * (s(-j) - s(j))).abs() < 1e-12);
        }
    }

    #[test]
    fn tight_at_expansion_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, 3, 2, 4);
            let dp = random_point(&mut rng, &inst);
            let ep = ExpansionPoint::new(&inst, &dp).unwrap();
            assert!(ep.is_consistent(&inst));
            for k in 0..3 {
                let s = ep.a[k].norm_sqr();
                assert!((f_k(&inst, &dp, &ep, k).unwrap() - s).abs() <= 1e-10 * (1.0 + s));
                for l in (0..3).filter(|&l| l != k) {
                    let t = targets(&inst, &dp, k, l);
                    for (f, tv) in UPPER.iter().zip(t) {
                        assert!((f(&inst, &dp, &ep, k, l).unwrap() - tv).abs() <= 1e-10 * (1.0 + tv.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn bounds_hold_at_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let inst = random_instance(&mut rng, 2, 2, 3);
            let dp = random_point(&mut rng, &inst);
            let ep = ExpansionPoint::new(&inst, &random_point(&mut rng, &inst)).unwrap();
            for k in 0..2 {
                let g = effective_channel(&inst, &dp.phi, k).unwrap();
                let s = dot(&g, dp.w_k(k)).norm_sqr();
                assert!(f_k(&inst, &dp, &ep, k).unwrap() <= s + 1e-10 * (1.0 + s));
                let l = 1 - k;
                for (f, tv) in UPPER.iter().zip(targets(&inst, &dp, k, l)) {
                    assert!(f(&inst, &dp, &ep, k, l).unwrap() >= tv - 1e-10 * (1.0 + tv.abs()));
                }
            }
        }
    }

    #[test]
    fn zero_beamformer_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_instance(&mut rng, 2, 3, 2);
        let mut e = random_point(&mut rng, &inst);
        for v in e.w_k_mut(0) {
            *v = C64::new(0.0, 0.0);
        }
        let ep = ExpansionPoint::new(&inst, &e).unwrap();
        assert_eq!(ep.a[0], C64::new(0.0, 0.0));
        let dp = random_point(&mut rng, &inst);
        let expect = -0.5 * norm_sq(dp.w_k(0));
        assert!((f_k(&inst, &dp, &ep, 0).unwrap() - expect).abs() < 1e-12);

        let sur = surrogate_coefficients(&inst, &ep, 0, None, SurrogateKind::F).unwrap();
        assert!(sur.affine.coef.iter().all(|c| *c == 0.0));
        assert_eq!(sur.affine.constant, 0.0);
    }

    #[test]
    fn curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = random_instance(&mut rng, 2, 2, 3);
        let ep = ExpansionPoint::new(&inst, &random_point(&mut rng, &inst)).unwrap();
        let lay = Layout::of(&inst);
        for _ in 0..100 {
            let x = lay.stack(&random_point(&mut rng, &inst));
            let y = lay.stack(&random_point(&mut rng, &inst));
            let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let (px, py, pm) = (lay.unstack(&x, false), lay.unstack(&y, false), lay.unstack(&m, false));
            let f = |p: &DesignPoint| f_k(&inst, p, &ep, 0).unwrap();
            assert!(f(&pm) >= 0.5 * (f(&px) + f(&py)) - 1e-10);
            for u in UPPER {
                let h = |p: &DesignPoint| u(&inst, p, &ep, 0, 1).unwrap();
                assert!(h(&pm) <= 0.5 * (h(&px) + h(&py)) + 1e-10);
            }
        }
    }

    #[test]
    fn real_valued_nu_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut inst = random_instance(&mut rng, 2, 2, 2);
        for m in [&mut inst.h_t, &mut inst.h_s, &mut inst.h_ts] {
            for v in &mut m.data {
                v.im = 0.0;
            }
        }
        for _ in 0..50 {
            let mut dp = random_point(&mut rng, &inst);
            for v in dp.w.iter_mut().chain(dp.phi.iter_mut()) {
                v.im = 0.0;
            }
            let ep = ExpansionPoint::new(&inst, &dp).unwrap();
            assert!(nu(&inst, &dp, &ep, 0, 1).unwrap().abs() < 1e-12);
            let mut other = random_point(&mut rng, &inst);
            for v in other.w.iter_mut().chain(other.phi.iter_mut()) {
                v.im = 0.0;
            }
            assert!(nu(&inst, &other, &ep, 0, 1).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn rejects_diagonal_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = random_instance(&mut rng, 2, 2, 2);
        let dp = random_point(&mut rng, &inst);
        let ep = ExpansionPoint::new(&inst, &dp).unwrap();
        assert!(mu(&inst, &dp, &ep, 1, 1).is_err());
        assert!(surrogate_coefficients(&inst, &ep, 0, Some(0), SurrogateKind::Nu).is_err());
        assert!(surrogate_coefficients(&inst, &ep, 0, Some(1), SurrogateKind::F).is_err());
    }

    #[test]
    fn coefficients_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 3, 2, 4);
            let lay = Layout::of(&inst);
            let e = random_point(&mut rng, &inst);
            let ep = ExpansionPoint::new(&inst, &e).unwrap();
            let f0 = surrogate_coefficients(&inst, &ep, 1, None, SurrogateKind::F).unwrap();
            let s = ep.a[1].norm_sqr();
            assert!((f0.eval(&lay.stack(&e)) - s).abs() <= 1e-10 * (1.0 + s));
            for _ in 0..100 {
                let dp = random_point(&mut rng, &inst);
                let x = lay.stack(&dp);
                for k in 0..3 {
                    let sur = surrogate_coefficients(&inst, &ep, k, None, SurrogateKind::F).unwrap();
                    let d = f_k(&inst, &dp, &ep, k).unwrap();
                    assert!((sur.eval(&x) - d).abs() <= 1e-10 * (1.0 + d.abs()));
                    for l in (0..3).filter(|&l| l != k) {
                        for (kind, f) in SurrogateKind::INTERFERENCE.iter().zip(UPPER) {
                            let sur = surrogate_coefficients(&inst, &ep, k, Some(l), *kind).unwrap();
                            let d = f(&inst, &dp, &ep, k, l).unwrap();
                            assert!((sur.eval(&x) - d).abs() <= 1e-10 * (1.0 + d.abs()));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scaled_coefficients_are_tight_and_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 2, 2, 3);
            let lay = Layout::of(&inst);
            let e = random_point(&mut rng, &inst);
            let ep = ExpansionPoint::new(&inst, &e).unwrap();
            let x0 = lay.stack(&e);
            for _ in 0..5 {
                let s = 10f64.powf(rng.random_range(-3.0..3.0));
                let sur = scaled_surrogate_coefficients(&inst, &ep, 0, None, SurrogateKind::F, s).unwrap();
                let a2 = ep.a[0].norm_sqr();
                assert!((sur.eval(&x0) - a2).abs() <= 1e-9 * (1.0 + a2));
                let kinds: Vec<_> = SurrogateKind::INTERFERENCE
                    .iter()
                    .map(|kd| scaled_surrogate_coefficients(&inst, &ep, 0, Some(1), *kd, s).unwrap())
                    .collect();
                for (sur, tv) in kinds.iter().zip(targets(&inst, &e, 0, 1)) {
                    assert!((sur.eval(&x0) - tv).abs() <= 1e-9 * (1.0 + tv.abs()));
                }
                for _ in 0..20 {
                    let dp = random_point(&mut rng, &inst);
                    let x = lay.stack(&dp);
                    let g = effective_channel(&inst, &dp.phi, 0).unwrap();
                    let sig = dot(&g, dp.w_k(0)).norm_sqr();
                    assert!(sur.eval(&x) <= sig + 1e-9 * (1.0 + sig));
                    for (sur, tv) in kinds.iter().zip(targets(&inst, &dp, 0, 1)) {
                        assert!(sur.eval(&x) >= tv - 1e-9 * (1.0 + tv.abs()));
                    }
                }
            }
            assert!(scaled_surrogate_coefficients(&inst, &ep, 0, None, SurrogateKind::F, 0.0).is_err());
            assert!(scaled_surrogate_coefficients(&inst, &ep, 0, None, SurrogateKind::F, f64::NAN).is_err());
        }
    }

    #[test]
    fn stack_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inst = random_instance(&mut rng, 2, 3, 5);
        let dp = random_point(&mut rng, &inst);
        let lay = Layout::of(&inst);
        assert_eq!(lay.unstack(&lay.stack(&dp), false), dp);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn surrogates_bound_and_touch(seed in any::<u64>(), k in 2usize..4, n_t in 1usize..4, n_s in 1usize..6) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let inst = random_instance(&mut rng, k, n_t, n_s);
                let e = random_point(&mut rng, &inst);
                let dp = random_point(&mut rng, &inst);
                let ep = ExpansionPoint::new(&inst, &e).unwrap();
                for a in 0..k {
                    let g = effective_channel(&inst, &dp.phi, a).unwrap();
                    let sig = dot(&g, dp.w_k(a)).norm_sqr();
                    prop_assert!(f_k(&inst, &dp, &ep, a).unwrap() <= sig + 1e-10 * (1.0 + sig));
                    let s0 = ep.a[a].norm_sqr();
                    prop_assert!((f_k(&inst, &e, &ep, a).unwrap() - s0).abs() <= 1e-10 * (1.0 + s0));
                    for b in (0..k).filter(|&b| b != a) {
                        for ((f, tv), t0) in UPPER.iter().zip(targets(&inst, &dp, a, b)).zip(targets(&inst, &e, a, b)) {
                            prop_assert!(f(&inst, &dp, &ep, a, b).unwrap() >= tv - 1e-10 * (1.0 + tv.abs()));
                            prop_assert!((f(&inst, &e, &ep, a, b).unwrap() - t0).abs() <= 1e-10 * (1.0 + t0.abs()));
                        }
                    }
                }
            }
        }
    }
}
