//! Design points and exact evaluation of SINR, power and feasibility.

use crate::channel::{ProblemInstance, C64};
use crate::error::{Error, Result};
use crate::textio::{self, Reader};

pub const DEFAULT_TOL_SINR: f64 = 1e-6;
pub const DEFAULT_TOL_MOD: f64 = 1e-3;

pub const DESIGN_HEADER: &str = "# irs-sca design v1";

/// Stacked beamformers `w = [w_1; ...; w_K]` and IRS coefficients `phi`.
/// `unit_modulus` records whether the point claims `|phi_i| = 1`; otherwise
/// it is a relaxed point with `|phi_i| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub k: usize,
    pub n_t: usize,
    pub w: Vec<C64>,
    pub phi: Vec<C64>,
    pub unit_modulus: bool,
}

impl DesignPoint {
    pub fn new(k: usize, n_t: usize, w: Vec<C64>, phi: Vec<C64>, unit_modulus: bool) -> Result<Self> {
        if w.len() != k * n_t {
            return Err(Error::Dimension(format!(
                "w has {} entries, expected K*N_t = {}",
                w.len(),
                k * n_t
            )));
        }
        Ok(Self {
            k,
            n_t,
            w,
            phi,
            unit_modulus,
        })
    }

    pub fn zeros(inst: &ProblemInstance) -> Self {
        Self {
            k: inst.k,
            n_t: inst.n_t,
            w: vec![C64::new(0.0, 0.0); inst.k * inst.n_t],
            phi: vec![C64::new(0.0, 0.0); inst.n_s],
            unit_modulus: false,
        }
    }

    pub fn w_k(&self, k: usize) -> &[C64] {
        &self.w[k * self.n_t..(k + 1) * self.n_t]
    }

    pub fn w_k_mut(&mut self, k: usize) -> &mut [C64] {
        let n = self.n_t;
        &mut self.w[k * n..(k + 1) * n]
    }

    pub fn modulus_violation(&self) -> f64 {
        self.phi.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn check_dims(&self, inst: &ProblemInstance) -> Result<()> {
        if self.k != inst.k || self.n_t != inst.n_t || self.w.len() != inst.k * inst.n_t {
            return Err(Error::Dimension(format!(
                "design point is for K={}, N_t={}, instance has K={}, N_t={}",
                self.k, self.n_t, inst.k, inst.n_t
            )));
        }
        if self.phi.len() != inst.n_s {
            return Err(Error::Dimension(format!(
                "phi has {} entries, instance has N_s={}",
                self.phi.len(),
                inst.n_s
            )));
        }
        Ok(())
    }

    /// Checks dimensions and the modulus contract the point claims.
    pub fn validate(&self, inst: &ProblemInstance, tol_mod: f64) -> Result<()> {
        self.check_dims(inst)?;
        if self
            .w
            .iter()
            .chain(&self.phi)
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite entries".into()));
        }
        if self.unit_modulus {
            let v = self.modulus_violation();
            if v > tol_mod {
                return Err(Error::InvalidArgument(format!(
                    "point claims unit modulus but deviates by {v}"
                )));
            }
        } else if let Some(p) = self.phi.iter().find(|p| p.norm() > 1.0 + tol_mod) {
            return Err(Error::InvalidArgument(format!(
                "relaxed point has |phi_i| = {} > 1",
                p.norm()
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(DESIGN_HEADER);
        out.push('\n');
        out.push_str(&format!("dims {} {} {}\n", self.k, self.n_t, self.phi.len()));
        out.push_str(&format!("unit_modulus {}\n", self.unit_modulus));
        out.push_str("w\n");
        let w = crate::channel::CMat {
            rows: self.k,
            cols: self.n_t,
            data: self.w.clone(),
        };
        textio::write_rows(&mut out, &w);
        out.push_str("phi\n");
        let p = crate::channel::CMat {
            rows: 1,
            cols: self.phi.len(),
            data: self.phi.clone(),
        };
        textio::write_rows(&mut out, &p);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text, DESIGN_HEADER)?;
        let dims = r.keyed_usizes("dims", 3)?;
        let (k, n_t, n_s) = (dims[0], dims[1], dims[2]);
        let unit_modulus = r.keyed_bool("unit_modulus")?;
        r.expect_word("w")?;
        let w = r.matrix(k, n_t)?;
        r.expect_word("phi")?;
        let phi = r.matrix(1, n_s)?;
        r.finish()?;
        Self::new(k, n_t, w.data, phi.data, unit_modulus)
    }
}

/// Outcome of checking a design point against the SINR targets and the
/// unit-modulus constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub sinr: Vec<f64>,
    /// `sinr_k - gamma_k`.
    pub margin: Vec<f64>,
    pub modulus_violation: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `g_k = h_tk + h_sk diag(phi) H_ts`.
pub fn effective_channel(inst: &ProblemInstance, phi: &[C64], k: usize) -> Result<Vec<C64>> {
    if k >= inst.k {
        return Err(Error::Dimension(format!("user {k} out of range for K={}", inst.k)));
    }
    if phi.len() != inst.n_s {
        return Err(Error::Dimension(format!(
            "phi has {} entries, expected {}",
            phi.len(),
            inst.n_s
        )));
    }
    Ok(effective_channel_unchecked(inst, phi, k))
}

pub(crate) fn effective_channel_unchecked(inst: &ProblemInstance, phi: &[C64], k: usize) -> Vec<C64> {
    let mut g = inst.h_t.row(k).to_vec();
    let hs = inst.h_s.row(k);
    for s in 0..inst.n_s {
        let c = hs[s] * phi[s];
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        for (gi, h) in g.iter_mut().zip(inst.h_ts.row(s)) {
            *gi += c * h;
        }
    }
    g
}

/// Inner products `g_k w_l` for all `l`.
pub(crate) fn gains(g: &[C64], dp: &DesignPoint) -> Vec<C64> {
    (0..dp.k).map(|l| dot(g, dp.w_k(l))).collect()
}

pub fn sinr(inst: &ProblemInstance, dp: &DesignPoint, k: usize) -> Result<f64> {
    dp.check_dims(inst)?;
    let g = effective_channel(inst, &dp.phi, k)?;
    Ok(sinr_from_gains(&gains(&g, dp), k))
}

pub(crate) fn sinr_from_gains(gw: &[C64], k: usize) -> f64 {
    let interference: f64 = gw
        .iter()
        .enumerate()
        .filter(|(l, _)| *l != k)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    gw[k].norm_sqr() / (1.0 + interference)
}

pub fn transmit_power(dp: &DesignPoint) -> f64 {
    dp.w.iter().map(|v| v.norm_sqr()).sum()
}

/// Feasible iff every `sinr_k >= gamma_k (1 - tol_sinr)` and every
/// `||phi_i| - 1| <= tol_mod`.
pub fn check_feasibility(
    inst: &ProblemInstance,
    dp: &DesignPoint,
    tol_sinr: f64,
    tol_mod: f64,
) -> Result<FeasibilityReport> {
    if !(tol_sinr >= 0.0 && tol_mod >= 0.0) {
        return Err(Error::InvalidArgument("tolerances must be nonnegative".into()));
    }
    dp.check_dims(inst)?;
    let mut sinrs = Vec::with_capacity(inst.k);
    let mut margin = Vec::with_capacity(inst.k);
    let mut ok = true;
    for k in 0..inst.k {
        let s = sinr_from_gains(&gains(&effective_channel_unchecked(inst, &dp.phi, k), dp), k);
        let m = s - inst.gamma[k];
        ok &= m >= -tol_sinr * inst.gamma[k];
        sinrs.push(s);
        margin.push(m);
    }
    let modulus_violation = dp.modulus_violation();
    ok &= modulus_violation <= tol_mod;
    Ok(FeasibilityReport {
        sinr: sinrs,
        margin,
        modulus_violation,
        feasible: ok,
    })
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::channel::{complex_normal, CMat};
    use rand::Rng;

    pub fn random_instance<R: Rng>(rng: &mut R, k: usize, n_t: usize, n_s: usize) -> ProblemInstance {
        ProblemInstance {
            k,
            n_t,
            n_s,
            h_ts: CMat::from_fn(n_s, n_t, |_, _| complex_normal(rng)),
            h_t: CMat::from_fn(k, n_t, |_, _| complex_normal(rng)),
            h_s: CMat::from_fn(k, n_s, |_, _| complex_normal(rng)),
            gamma: (0..k).map(|_| rng.random_range(0.5..5.0)).collect(),
        }
    }

    pub fn random_point<R: Rng>(rng: &mut R, inst: &ProblemInstance) -> DesignPoint {
        let w = (0..inst.k * inst.n_t).map(|_| complex_normal(rng)).collect();
        let phi = (0..inst.n_s)
            .map(|_| C64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..6.3)))
            .collect();
        DesignPoint::new(inst.k, inst.n_t, w, phi, false).unwrap()
    }

    pub fn scalar_instance(h_t: C64, h_s: C64, h_ts: C64, gamma: f64) -> ProblemInstance {
        ProblemInstance {
            k: 1,
            n_t: 1,
            n_s: 1,
            h_ts: CMat {
                rows: 1,
                cols: 1,
                data: vec![h_ts],
            },
            h_t: CMat {
                rows: 1,
                cols: 1,
                data: vec![h_t],
            },
            h_s: CMat {
                rows: 1,
                cols: 1,
                data: vec![h_s],
            },
            gamma: vec![gamma],
        }
    }
}
