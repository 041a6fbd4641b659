//! Scenario geometry, large- and small-scale fading, and problem instances.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textio::{self, Reader};

pub type C64 = Complex64;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Largest Rician factor accepted; pure line of sight is not representable.
pub const MAX_RICIAN_FACTOR: f64 = 1e12;

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// RNG stream ids, one per random quantity of an instance.
const STREAM_PLACEMENT: u64 = 0;
const STREAM_BS_IRS: u64 = 1;
const STREAM_IRS_USER: u64 = 2;
const STREAM_BS_USER: u64 = 3;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale(&mut self, f: f64) {
        for v in &mut self.data {
            *v *= f;
        }
    }
}

/// Node placement and radio parameters. Positions are in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGeometry {
    pub bs_center: [f64; 3],
    pub irs_center: [f64; 3],
    pub user_disk_center: [f64; 3],
    pub user_disk_radius: f64,
    pub carrier_freq: f64,
    pub bandwidth: f64,
    pub bs_antenna_spacing: f64,
    pub irs_element_spacing: f64,
    pub min_user_separation: f64,
    pub noise_psd_dbm_per_hz: f64,
}

impl Default for ScenarioGeometry {
    fn default() -> Self {
        let carrier_freq = 2e9;
        let lambda = SPEED_OF_LIGHT / carrier_freq;
        Self {
            bs_center: [0.0, 20.0, 10.0],
            irs_center: [30.0, 0.0, 5.0],
            user_disk_center: [350.0, 10.0, 2.0],
            user_disk_radius: 5.0,
            carrier_freq,
            bandwidth: 20e6,
            bs_antenna_spacing: lambda / 2.0,
            irs_element_spacing: lambda / 2.0,
            min_user_separation: 2.0 * lambda,
            noise_psd_dbm_per_hz: -174.0,
        }
    }
}

impl ScenarioGeometry {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_psd_dbm_per_hz + 10.0 * self.bandwidth.log10()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("user_disk_radius", self.user_disk_radius),
            ("carrier_freq", self.carrier_freq),
            ("bandwidth", self.bandwidth),
            ("bs_antenna_spacing", self.bs_antenna_spacing),
            ("irs_element_spacing", self.irs_element_spacing),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.min_user_separation.is_finite() && self.min_user_separation >= 0.0) {
            return Err(Error::InvalidConfig("min_user_separation must be >= 0".into()));
        }
        let pts = [self.bs_center, self.irs_center, self.user_disk_center];
        if pts.iter().flatten().any(|v| !v.is_finite()) || !self.noise_psd_dbm_per_hz.is_finite() {
            return Err(Error::InvalidConfig("non-finite position or noise density".into()));
        }
        if distance(&self.bs_center, &self.irs_center) <= 0.0 {
            return Err(Error::InvalidConfig("BS and IRS coincide".into()));
        }
        Ok(())
    }
}

/// Rician factors (linear) and path-loss parameters per link class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingParams {
    pub rician_bs_irs: f64,
    pub rician_irs_user: f64,
    pub rician_bs_user: f64,
    pub pathloss_exp_bs_irs: f64,
    pub pathloss_exp_irs_user: f64,
    pub pathloss_exp_bs_user: f64,
    pub reference_pathloss_db: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        let k3db = 10f64.powf(0.3);
        Self {
            rician_bs_irs: k3db,
            rician_irs_user: k3db,
            rician_bs_user: 0.0,
            pathloss_exp_bs_irs: 2.2,
            pathloss_exp_irs_user: 2.2,
            pathloss_exp_bs_user: 3.6,
            reference_pathloss_db: 30.0,
        }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, k) in [
            ("rician_bs_irs", self.rician_bs_irs),
            ("rician_irs_user", self.rician_irs_user),
            ("rician_bs_user", self.rician_bs_user),
        ] {
            if !(k >= 0.0 && k <= MAX_RICIAN_FACTOR) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, {MAX_RICIAN_FACTOR:e}], got {k}"
                )));
            }
        }
        for (name, a) in [
            ("pathloss_exp_bs_irs", self.pathloss_exp_bs_irs),
            ("pathloss_exp_irs_user", self.pathloss_exp_irs_user),
            ("pathloss_exp_bs_user", self.pathloss_exp_bs_user),
            ("reference_pathloss_db", self.reference_pathloss_db),
        ] {
            if !a.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// One optimization problem. `h_ts` and `h_t` are already divided by the
/// noise amplitude, so the noise power is one in these units.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub k: usize,
    pub n_t: usize,
    pub n_s: usize,
    /// BS to IRS, `n_s x n_t`.
    pub h_ts: CMat,
    /// BS to users, `k x n_t`; row `k` is `h_tk`.
    pub h_t: CMat,
    /// IRS to users, `k x n_s`; row `k` is `h_sk`.
    pub h_s: CMat,
    /// Linear SINR targets.
    pub gamma: Vec<f64>,
}

impl ProblemInstance {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_t == 0 || self.n_s == 0 {
            return Err(Error::Dimension("K, N_t and N_s must be positive".into()));
        }
        let shapes = [
            ("H_ts", &self.h_ts, self.n_s, self.n_t),
            ("h_t", &self.h_t, self.k, self.n_t),
            ("h_s", &self.h_s, self.k, self.n_s),
        ];
        for (name, m, r, c) in shapes {
            if m.rows != r || m.cols != c || m.data.len() != r * c {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.rows, m.cols
                )));
            }
            if m.data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} has non-finite entries")));
            }
        }
        if self.gamma.len() != self.k {
            return Err(Error::Dimension(format!(
                "{} SINR targets for {} users",
                self.gamma.len(),
                self.k
            )));
        }
        if self.gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidArgument("SINR targets must be positive".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(INSTANCE_HEADER);
        out.push('\n');
        out.push_str(&format!("dims {} {} {}\n", self.k, self.n_t, self.n_s));
        out.push_str("gamma");
        for g in &self.gamma {
            out.push_str(&format!(" {g}"));
        }
        out.push('\n');
        for (name, m) in [("H_ts", &self.h_ts), ("h_t", &self.h_t), ("h_s", &self.h_s)] {
            out.push_str(name);
            out.push('\n');
            textio::write_rows(&mut out, m);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text, INSTANCE_HEADER)?;
        let dims = r.keyed_usizes("dims", 3)?;
        let (k, n_t, n_s) = (dims[0], dims[1], dims[2]);
        let gamma = r.keyed_f64s("gamma", k)?;
        r.expect_word("H_ts")?;
        let h_ts = r.matrix(n_s, n_t)?;
        r.expect_word("h_t")?;
        let h_t = r.matrix(k, n_t)?;
        r.expect_word("h_s")?;
        let h_s = r.matrix(k, n_s)?;
        r.finish()?;
        let inst = Self {
            k,
            n_t,
            n_s,
            h_ts,
            h_t,
            h_s,
            gamma,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// SHA-256 of the text form, as lowercase hex.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_text().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub const INSTANCE_HEADER: &str = "# irs-sca instance v1";

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// `ref_db + 10 * exponent * log10(d)`.
pub fn pathloss_db(d: f64, exponent: f64, ref_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(ref_db + 10.0 * exponent * d.log10())
}

pub fn noise_power_dbm(psd_dbm_per_hz: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth_hz}"
        )));
    }
    Ok(psd_dbm_per_hz + 10.0 * bandwidth_hz.log10())
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform placement in the horizontal disk with rejection of points closer
/// than `min_user_separation` to an earlier user.
pub fn place_users(geom: &ScenarioGeometry, k: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    geom.validate()?;
    let mut rng = stream(seed, STREAM_PLACEMENT);
    let c = geom.user_disk_center;
    let mut users: Vec<[f64; 3]> = Vec::with_capacity(k);
    let mut attempts = 0;
    while users.len() < k {
        if attempts >= PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementFailure { k, attempts });
        }
        attempts += 1;
        let r = geom.user_disk_radius * rng.random::<f64>().sqrt();
        let th = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let p = [c[0] + r * th.cos(), c[1] + r * th.sin(), c[2]];
        if users.iter().all(|u| distance(u, &p) >= geom.min_user_separation) {
            users.push(p);
        }
    }
    Ok(users)
}

/// Element offsets of the BS uniform linear array (along x).
fn ula_offsets(n: usize, spacing: f64) -> Vec<[f64; 3]> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n).map(|i| [(i as f64 - mid) * spacing, 0.0, 0.0]).collect()
}

/// Element offsets of the square IRS planar array (in the x-z plane).
fn upa_offsets(n: usize, spacing: f64) -> Result<Vec<[f64; 3]>> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidConfig(format!(
            "N_s = {n} is not a perfect square; the IRS line-of-sight model needs a square array"
        )));
    }
    let mid = (side as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(n);
    for row in 0..side {
        for col in 0..side {
            out.push([(col as f64 - mid) * spacing, 0.0, (row as f64 - mid) * spacing]);
        }
    }
    Ok(out)
}

/// Far-field line-of-sight response from a transmit array to a receive
/// array: `H[j, i] = exp(-j k (d + u.eps_j - u.delta_i))`.
fn los(tx_center: &[f64; 3], tx: &[[f64; 3]], rx_center: &[f64; 3], rx: &[[f64; 3]], wavelength: f64) -> CMat {
    let d = distance(tx_center, rx_center);
    let u = [
        (rx_center[0] - tx_center[0]) / d,
        (rx_center[1] - tx_center[1]) / d,
        (rx_center[2] - tx_center[2]) / d,
    ];
    let dot = |p: &[f64; 3]| u[0] * p[0] + u[1] * p[1] + u[2] * p[2];
    let kw = 2.0 * std::f64::consts::PI / wavelength;
    CMat::from_fn(rx.len(), tx.len(), |j, i| {
        let path = d + dot(&rx[j]) - dot(&tx[i]);
        C64::from_polar(1.0, -kw * path)
    })
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `sqrt(kappa/(1+kappa)) LoS + sqrt(1/(1+kappa)) NLoS`, with the LoS part
/// built lazily so Rayleigh links need no array geometry.
fn rician<R: Rng>(
    rows: usize,
    cols: usize,
    kappa: f64,
    los: impl FnOnce() -> Result<CMat>,
    rng: &mut R,
) -> Result<CMat> {
    let mut h = CMat::from_fn(rows, cols, |_, _| complex_normal(rng));
    h.scale((1.0 / (1.0 + kappa)).sqrt());
    if kappa > 0.0 {
        let l = los()?;
        let a = (kappa / (1.0 + kappa)).sqrt();
        for (v, lv) in h.data.iter_mut().zip(&l.data) {
            *v += lv * a;
        }
    }
    Ok(h)
}

/// Small-scale fading of one link class, before path loss. Exposed for
/// statistical checks of the Rician mixture.
pub fn small_scale(rows: usize, cols: usize, kappa: f64, los: &CMat, seed: u64) -> Result<CMat> {
    if !(kappa >= 0.0 && kappa <= MAX_RICIAN_FACTOR) {
        return Err(Error::InvalidConfig(format!("Rician factor {kappa} out of range")));
    }
    let mut rng = stream(seed, STREAM_BS_IRS);
    rician(rows, cols, kappa, || Ok(los.clone()), &mut rng)
}

#[allow(clippy::too_many_arguments)]
pub fn generate_instance(
    geom: &ScenarioGeometry,
    fading: &FadingParams,
    k: usize,
    n_t: usize,
    n_s: usize,
    gamma: &[f64],
    seed: u64,
) -> Result<ProblemInstance> {
    if k == 0 || n_t == 0 || n_s == 0 {
        return Err(Error::InvalidArgument("K, N_t and N_s must be at least 1".into()));
    }
    if gamma.len() != k {
        return Err(Error::Dimension(format!("{} targets for {k} users", gamma.len())));
    }
    geom.validate()?;
    fading.validate()?;
    let users = place_users(geom, k, seed)?;
    let lambda = geom.wavelength();
    let bs = ula_offsets(n_t, geom.bs_antenna_spacing);
    let irs_los_needed = fading.rician_bs_irs > 0.0 || fading.rician_irs_user > 0.0;
    let irs = if irs_los_needed {
        upa_offsets(n_s, geom.irs_element_spacing)?
    } else {
        Vec::new()
    };
    let origin = [[0.0; 3]];

    let sigma = dbm_to_watts(geom.noise_power_dbm()).sqrt();
    let amp = |d: f64, exponent: f64| -> Result<f64> {
        Ok(10f64.powf(-pathloss_db(d, exponent, fading.reference_pathloss_db)? / 20.0))
    };

    let mut rng = stream(seed, STREAM_BS_IRS);
    let mut h_ts = rician(
        n_s,
        n_t,
        fading.rician_bs_irs,
        || Ok(los(&geom.bs_center, &bs, &geom.irs_center, &irs, lambda)),
        &mut rng,
    )?;
    h_ts.scale(amp(distance(&geom.bs_center, &geom.irs_center), fading.pathloss_exp_bs_irs)? / sigma);

    let mut rng_s = stream(seed, STREAM_IRS_USER);
    let mut rng_t = stream(seed, STREAM_BS_USER);
    let mut h_s = CMat::zeros(k, n_s);
    let mut h_t = CMat::zeros(k, n_t);
    for (u, pos) in users.iter().enumerate() {
        let row = rician(
            1,
            n_s,
            fading.rician_irs_user,
            || Ok(los(&geom.irs_center, &irs, pos, &origin, lambda)),
            &mut rng_s,
        )?;
        let a = amp(distance(&geom.irs_center, pos), fading.pathloss_exp_irs_user)?;
        for j in 0..n_s {
            h_s.set(u, j, row.get(0, j) * a);
        }
        let row = rician(
            1,
            n_t,
            fading.rician_bs_user,
            || Ok(los(&geom.bs_center, &bs, pos, &origin, lambda)),
            &mut rng_t,
        )?;
        let a = amp(distance(&geom.bs_center, pos), fading.pathloss_exp_bs_user)? / sigma;
        for j in 0..n_t {
            h_t.set(u, j, row.get(0, j) * a);
        }
    }
    let inst = ProblemInstance {
        k,
        n_t,
        n_s,
        h_ts,
        h_t,
        h_s,
        gamma: gamma.to_vec(),
    };
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pathloss_examples() {
        assert!((pathloss_db(1.0, 2.2, 30.0).unwrap() - 30.0).abs() < 1e-12);
        assert!((pathloss_db(100.0, 2.2, 30.0).unwrap() - 74.0).abs() < 1e-12);
        assert!((pathloss_db(10.0, 3.6, 30.0).unwrap() - 66.0).abs() < 1e-12);
        assert!(pathloss_db(0.0, 2.0, 30.0).is_err());
        assert!(pathloss_db(-1.0, 2.0, 30.0).is_err());
    }

    #[test]
    fn pathloss_is_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..100 {
            let v = pathloss_db(i as f64 * 0.7, 2.2, 30.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn noise_power_examples() {
        assert!((noise_power_dbm(-174.0, 20e6).unwrap() - (-100.9897)).abs() < 1e-3);
        assert!((noise_power_dbm(-174.0, 1.0).unwrap() + 174.0).abs() < 1e-12);
        assert!((noise_power_dbm(0.0, 10.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(noise_power_dbm(0.0, 0.0).is_err());
    }

    #[test]
    fn single_user_lands_in_disk() {
        let g = ScenarioGeometry::default();
        for seed in 0..20 {
            let u = place_users(&g, 1, seed).unwrap();
            assert!(distance(&u[0], &g.user_disk_center) <= 5.0);
            assert_eq!(u[0][2], 2.0);
        }
    }

    #[test]
    fn pair_respects_separation() {
        let g = ScenarioGeometry {
            min_user_separation: 0.3,
            ..Default::default()
        };
        for seed in 0..50 {
            let u = place_users(&g, 2, seed).unwrap();
            assert!(distance(&u[0], &u[1]) >= 0.3);
        }
    }

    #[test]
    fn crowded_disk_fails() {
        let g = ScenarioGeometry {
            user_disk_radius: 0.1,
            min_user_separation: 0.3,
            ..Default::default()
        };
        match place_users(&g, 50, 1) {
            Err(Error::PlacementFailure { k: 50, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn upa_rejects_non_square() {
        assert!(upa_offsets(10, 0.1).is_err());
        assert_eq!(upa_offsets(16, 0.1).unwrap().len(), 16);
    }

    fn unit_los(rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |i, j| C64::from_polar(1.0, 0.3 * i as f64 - 0.7 * j as f64))
    }

    #[test]
    fn rayleigh_entries_are_zero_mean() {
        let h = small_scale(100, 100, 0.0, &unit_los(100, 100), 4).unwrap();
        let n = h.data.len() as f64;
        let mean: C64 = h.data.iter().sum::<C64>() / n;
        let se = (0.5 / n).sqrt();
        assert!(mean.re.abs() < 3.0 * se && mean.im.abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn strong_rician_matches_los_magnitude() {
        let h = small_scale(20, 20, 1e6, &unit_los(20, 20), 9).unwrap();
        for v in &h.data {
            assert!((v.norm() - 1.0).abs() < 0.01);
        }
        assert!(small_scale(2, 2, 1e13, &unit_los(2, 2), 9).is_err());
    }

    #[test]
    fn rician_power_is_normalized() {
        for kappa in [0.0, 2.0, 10.0] {
            let h = small_scale(1000, 100, kappa, &unit_los(1000, 100), 2).unwrap();
            let p = h.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.data.len() as f64;
            assert!((p - 1.0).abs() < 0.02, "kappa {kappa}: {p}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let g = ScenarioGeometry::default();
        let f = FadingParams::default();
        let a = generate_instance(&g, &f, 3, 4, 16, &[10.0; 3], 42).unwrap();
        let b = generate_instance(&g, &f, 3, 4, 16, &[10.0; 3], 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        let c = generate_instance(&g, &f, 3, 4, 16, &[10.0; 3], 43).unwrap();
        assert_ne!(a, c);
        assert_eq!(ProblemInstance::from_text(&a.to_text()).unwrap(), a);
    }

    #[test]
    fn quadrupled_noise_halves_normalized_channels() {
        let g = ScenarioGeometry::default();
        let loud = ScenarioGeometry {
            noise_psd_dbm_per_hz: g.noise_psd_dbm_per_hz + 10.0 * 4f64.log10(),
            ..g.clone()
        };
        let f = FadingParams::default();
        let a = generate_instance(&g, &f, 2, 2, 4, &[1.0; 2], 5).unwrap();
        let b = generate_instance(&loud, &f, 2, 2, 4, &[1.0; 2], 5).unwrap();
        for (x, y) in a
            .h_ts
            .data
            .iter()
            .chain(&a.h_t.data)
            .zip(b.h_ts.data.iter().chain(&b.h_t.data))
        {
            assert!((x * 0.5 - y).norm() <= 1e-12 * x.norm());
        }
        assert_eq!(a.h_s, b.h_s);
    }

    #[test]
    fn non_square_irs_needs_rayleigh() {
        let g = ScenarioGeometry::default();
        let f = FadingParams::default();
        assert!(generate_instance(&g, &f, 1, 1, 10, &[1.0], 0).is_err());
        let ray = FadingParams {
            rician_bs_irs: 0.0,
            rician_irs_user: 0.0,
            ..f
        };
        assert!(generate_instance(&g, &ray, 1, 1, 10, &[1.0], 0).is_ok());
    }

    #[test]
    fn los_entries_have_unit_modulus() {
        let h = los(
            &[0.0, 0.0, 0.0],
            &ula_offsets(4, 0.075),
            &[10.0, 3.0, 1.0],
            &upa_offsets(9, 0.075).unwrap(),
            0.15,
        );
        for v in &h.data {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }
}
