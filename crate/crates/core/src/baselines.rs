//! Alternating-optimization baseline: beamformer update by SOCP, phase update
//! by semidefinite relaxation with Gaussian randomization.

use std::time::Instant;

use faer::{Mat, Side};
use irs_conic::{solve, AffineExpr, Cone, ConicProgram, ProgramBuilder, Settings, SolveResult, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{ProblemInstance, C64};
use crate::error::{Error, Result};
use crate::sca::{self, RunStatus, ScaSettings, Trace, TraceRow};
use crate::sysmodel::{check_feasibility, effective_channel, gains, transmit_power, DesignPoint};

/// Optimal beamformers for fixed phases, with the compiled program and raw
/// solver output kept for certificate checks.
#[derive(Debug, Clone)]
pub struct WUpdate {
    pub w: Vec<C64>,
    pub power: f64,
    pub program: ConicProgram,
    pub result: SolveResult,
}

/// Builds the fixed-phase power minimization as an SOCP over
/// `[Re w; Im w; t]`: minimize `t` with `t >= ||w||` and, per user,
/// `Re{g_k w_k} >= sqrt(gamma_k) ||[1; g_k w_l (l != k)]||`.
pub fn w_update_program(inst: &ProblemInstance, phi: &[C64]) -> Result<ConicProgram> {
    inst.validate()?;
    let (k_users, n_t) = (inst.k, inst.n_t);
    let nw = k_users * n_t;
    let re = |l: usize, i: usize| l * n_t + i;
    let im = |l: usize, i: usize| nw + l * n_t + i;
    let t = 2 * nw;
    let mut b = ProgramBuilder::new(2 * nw + 1);
    b.objective_mut()[t] = 1.0;
    let mut norm = vec![AffineExpr::var(t)];
    norm.extend((0..2 * nw).map(AffineExpr::var));
    b.push(Cone::Soc(1 + 2 * nw), norm)?;
    for k in 0..k_users {
        let g = effective_channel(inst, phi, k)?;
        let re_gw = |l: usize| {
            AffineExpr::new(
                (0..n_t)
                    .flat_map(|i| [(re(l, i), g[i].re), (im(l, i), -g[i].im)])
                    .collect(),
                0.0,
            )
        };
        let im_gw = |l: usize| {
            AffineExpr::new(
                (0..n_t)
                    .flat_map(|i| [(im(l, i), g[i].re), (re(l, i), g[i].im)])
                    .collect(),
                0.0,
            )
        };
        let mut e = vec![re_gw(k).scaled(1.0 / inst.gamma[k].sqrt()), AffineExpr::constant(1.0)];
        for l in (0..k_users).filter(|&l| l != k) {
            e.push(re_gw(l));
            e.push(im_gw(l));
        }
        b.push(Cone::Soc(2 + 2 * (k_users - 1)), e)?;
    }
    Ok(b.build()?)
}

/// Residual level at which a solve that stopped short of its tolerance
/// (iteration cap or numerical breakdown) is still used.
pub const ACCEPT_TOL: f64 = 1e-6;

/// Minimum-power beamformers for fixed unit-modulus phases. The solver
/// output is scaled up by the smallest factor that meets every target
/// exactly, which removes interior-point boundary error.
pub fn w_update(inst: &ProblemInstance, phi: &[C64], settings: &Settings) -> Result<WUpdate> {
    let program = w_update_program(inst, phi)?;
    let result = solve(&program, settings)?;
    match result.status {
        Status::Optimal => {}
        Status::PrimalInfeasible => return Err(Error::Infeasible),
        _ if result.accurate_to(ACCEPT_TOL) => {}
        s => return Err(Error::Solver(s)),
    }
    let nw = inst.k * inst.n_t;
    let w: Vec<C64> = (0..nw).map(|i| C64::new(result.x[i], result.x[nw + i])).collect();
    let mut dp = DesignPoint::new(inst.k, inst.n_t, w, phi.to_vec(), true)?;
    raise_to_targets(inst, &mut dp)?;
    let w = dp.w;
    let power = w.iter().map(|v| v.norm_sqr()).sum();
    Ok(WUpdate {
        w,
        power,
        program,
        result,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdrSettings {
    pub n_randomizations: usize,
    pub ao_max_rounds: usize,
    pub ao_rel_tol: f64,
    pub sdp_tol: f64,
    /// Residual level at which an SDP solve that stopped short of `sdp_tol`
    /// still seeds the randomization.
    pub sdp_accept_tol: f64,
    pub sdp_max_iters: usize,
    pub psd_cap: usize,
}

impl Default for SdrSettings {
    fn default() -> Self {
        Self {
            n_randomizations: 200,
            ao_max_rounds: 20,
            ao_rel_tol: 1e-5,
            sdp_tol: 1e-7,
            sdp_accept_tol: 1e-4,
            sdp_max_iters: 100,
            psd_cap: 200,
        }
    }
}

impl SdrSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_randomizations == 0 {
            return Err(Error::InvalidConfig("n_randomizations must be >= 1".into()));
        }
        if self.ao_max_rounds == 0 || !(self.ao_rel_tol > 0.0) || !(self.sdp_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "ao_max_rounds, ao_rel_tol and sdp_tol must be positive".into(),
            ));
        }
        if !(self.sdp_accept_tol >= self.sdp_tol) {
            return Err(Error::InvalidConfig("sdp_accept_tol must be >= sdp_tol".into()));
        }
        Ok(())
    }
}

/// Scales `w` up by the smallest factor `c >= 1` that meets every SINR
/// target; SINR is increasing in a common scale of all beamformers. Users
/// that no scaling can satisfy are ignored.
pub fn raise_to_targets(inst: &ProblemInstance, dp: &mut DesignPoint) -> Result<()> {
    dp.check_dims(inst)?;
    let mut scale: f64 = 1.0;
    for k in 0..inst.k {
        let gw = gains(&effective_channel(inst, &dp.phi, k)?, dp);
        let interf: f64 = gw
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != k)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        let excess = gw[k].norm_sqr() - inst.gamma[k] * interf;
        if excess > 0.0 {
            scale = scale.max((inst.gamma[k] / excess).sqrt());
        }
    }
    if scale > 1.0 {
        for v in &mut dp.w {
            *v *= scale;
        }
    }
    Ok(())
}

/// Per-pair vectors `c_kl` with `g_k w_l = c_kl^T [phi; 1]`.
struct Lift {
    d: usize,
    /// Indexed `[k * K + l]`.
    c: Vec<Vec<C64>>,
}

impl Lift {
    fn new(inst: &ProblemInstance, w: &[C64]) -> Self {
        let (kk, n_t, n_s) = (inst.k, inst.n_t, inst.n_s);
        let mut c = Vec::with_capacity(kk * kk);
        for k in 0..kk {
            for l in 0..kk {
                let wl = &w[l * n_t..(l + 1) * n_t];
                let mut v: Vec<C64> = (0..n_s)
                    .map(|s| {
                        let hw: C64 = inst.h_ts.row(s).iter().zip(wl).map(|(h, x)| h * x).sum();
                        inst.h_s.get(k, s) * hw
                    })
                    .collect();
                v.push(inst.h_t.row(k).iter().zip(wl).map(|(h, x)| h * x).sum());
                c.push(v);
            }
        }
        Self { d: n_s + 1, c }
    }

    fn gain(&self, kk: usize, k: usize, l: usize, v: &[C64]) -> C64 {
        self.c[k * kk + l].iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `min_k (|g_k w_k|^2 / gamma_k - 1 - sum_{l != k} |g_k w_l|^2)` and
    /// `sum_k (|g_k w_k|^2 - gamma_k (1 + sum_{l != k} |g_k w_l|^2))`.
    fn slack(&self, gamma: &[f64], v: &[C64]) -> (f64, f64) {
        let kk = gamma.len();
        let mut min = f64::INFINITY;
        let mut sum = 0.0;
        for k in 0..kk {
            let s = self.gain(kk, k, k, v).norm_sqr();
            let i: f64 = (0..kk)
                .filter(|&l| l != k)
                .map(|l| self.gain(kk, k, l, v).norm_sqr())
                .sum();
            min = min.min(s / gamma[k] - 1.0 - i);
            sum += s - gamma[k] * (1.0 + i);
        }
        (min, sum)
    }

    /// Hermitian `Q_k = R_kk - gamma_k sum_{l != k} R_kl`, `R = conj(c) c^T`.
    fn q(&self, gamma: &[f64], k: usize) -> Vec<C64> {
        let (kk, d) = (gamma.len(), self.d);
        let mut q = vec![C64::new(0.0, 0.0); d * d];
        for l in 0..kk {
            let wgt = if l == k { 1.0 } else { -gamma[k] };
            let c = &self.c[k * kk + l];
            for i in 0..d {
                for j in 0..d {
                    q[i * d + j] += c[i].conj() * c[j] * wgt;
                }
            }
        }
        q
    }
}

/// Index of the lifted variable pair `(A_ij, B_ij)`, `i < j`.
fn pair_index(d: usize, i: usize, j: usize) -> usize {
    i * d - i * (i + 1) / 2 + (j - i - 1)
}

/// Column-major lower-triangle storage index of `(r, c)`, `r >= c`.
fn svec_pos(n: usize, r: usize, c: usize) -> usize {
    c * n - c * (c + 1) / 2 + r
}

/// The relaxed phase problem: maximize `sum_k alpha_k` subject to
/// `tr(Q_k V) >= gamma_k + alpha_k`, `V >= 0`, `diag(V) = 1`, with Hermitian
/// `V = A + jB` embedded as the real block matrix `[[A, -B], [B, A]]`.
/// Variables are `A_ij`, `B_ij` for `i < j`, then `alpha`.
pub fn sdr_program(inst: &ProblemInstance, w: &[C64]) -> Result<ConicProgram> {
    inst.validate()?;
    if w.len() != inst.k * inst.n_t {
        return Err(Error::Dimension("w does not match instance".into()));
    }
    let lift = Lift::new(inst, w);
    Ok(build_sdr(inst, &lift)?)
}

fn build_sdr(inst: &ProblemInstance, lift: &Lift) -> Result<ConicProgram> {
    let d = lift.d;
    let np = d * (d - 1) / 2;
    let a_var = |i: usize, j: usize| pair_index(d, i, j);
    let b_var = |i: usize, j: usize| np + pair_index(d, i, j);
    let alpha = |k: usize| 2 * np + k;
    let mut b = ProgramBuilder::new(2 * np + inst.k);
    for k in 0..inst.k {
        b.objective_mut()[alpha(k)] = -1.0;
    }
    let mut rows = Vec::with_capacity(inst.k);
    for k in 0..inst.k {
        let q = lift.q(&inst.gamma, k);
        let mut terms = Vec::with_capacity(2 * np + 1);
        let mut constant = -inst.gamma[k];
        for i in 0..d {
            constant += q[i * d + i].re;
            for j in i + 1..d {
                let qij = q[i * d + j];
                terms.push((a_var(i, j), 2.0 * qij.re));
                terms.push((b_var(i, j), 2.0 * qij.im));
            }
        }
        terms.push((alpha(k), -1.0));
        rows.push(AffineExpr::new(terms, constant));
    }
    b.push(Cone::NonNeg(inst.k), rows)?;

    let n = 2 * d;
    let mut psd = vec![AffineExpr::default(); n * (n + 1) / 2];
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..d {
        psd[svec_pos(n, i, i)] = AffineExpr::constant(1.0);
        psd[svec_pos(n, d + i, d + i)] = AffineExpr::constant(1.0);
        for j in i + 1..d {
            psd[svec_pos(n, j, i)] = AffineExpr::new(vec![(a_var(i, j), r2)], 0.0);
            psd[svec_pos(n, d + j, d + i)] = AffineExpr::new(vec![(a_var(i, j), r2)], 0.0);
            psd[svec_pos(n, d + i, j)] = AffineExpr::new(vec![(b_var(i, j), r2)], 0.0);
            psd[svec_pos(n, d + j, i)] = AffineExpr::new(vec![(b_var(i, j), -r2)], 0.0);
        }
    }
    b.push(Cone::Psd(n), psd)?;
    Ok(b.build()?)
}

/// Result of one relaxed phase update.
#[derive(Debug, Clone)]
pub struct SdrOutcome {
    pub phi: Vec<C64>,
    /// True when a candidate strictly beat the incumbent.
    pub improved: bool,
    /// Minimum SINR slack of the returned phases.
    pub min_slack: f64,
    /// Optimal value `sum_k alpha_k` of the relaxation.
    pub sdp_value: f64,
    /// `sum_k alpha_k` achieved by the best randomized candidate.
    pub candidate_value: f64,
    /// Relaxation bound `sdp_value >= candidate_value` held within tolerance.
    pub bound_holds: bool,
    pub status: Status,
}

fn unit_phases(xi: &[C64]) -> Vec<C64> {
    let d = xi.len();
    let r = xi[d - 1];
    xi[..d - 1]
        .iter()
        .map(|v| {
            let z = v * r.conj();
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect()
}

fn with_one(phi: &[C64]) -> Vec<C64> {
    let mut v = phi.to_vec();
    v.push(C64::new(1.0, 0.0));
    v
}

/// Relaxed phase update for fixed `w`. Returns `incumbent` unchanged unless a
/// randomized candidate has a strictly larger minimum SINR slack.
pub fn phi_update_sdr(
    inst: &ProblemInstance,
    w: &[C64],
    incumbent: &[C64],
    settings: &SdrSettings,
    rng_seed: u64,
) -> Result<SdrOutcome> {
    settings.validate()?;
    if incumbent.len() != inst.n_s {
        return Err(Error::Dimension("incumbent phi does not match instance".into()));
    }
    let order = 2 * (inst.n_s + 1);
    if order > settings.psd_cap {
        return Err(irs_conic::ConicError::PsdTooLarge {
            order,
            cap: settings.psd_cap,
        }
        .into());
    }
    let prog = sdr_program(inst, w)?;
    let lift = Lift::new(inst, w);
    let mut solver = Settings::with_tol(settings.sdp_tol, settings.sdp_max_iters);
    solver.psd_cap = settings.psd_cap;
    let res = solve(&prog, &solver)?;
    if !(res.is_optimal() || res.accurate_to(settings.sdp_accept_tol)) {
        return Err(Error::Solver(res.status));
    }
    let d = lift.d;
    let n = 2 * d;
    let np = d * (d - 1) / 2;
    let mut m = Mat::<f64>::zeros(n, n);
    for i in 0..d {
        m[(i, i)] = 1.0;
        m[(d + i, d + i)] = 1.0;
        for j in i + 1..d {
            let a = res.x[pair_index(d, i, j)];
            let bij = res.x[np + pair_index(d, i, j)];
            m[(i, j)] = a;
            m[(j, i)] = a;
            m[(d + i, d + j)] = a;
            m[(d + j, d + i)] = a;
            m[(d + i, j)] = bij;
            m[(j, d + i)] = bij;
            m[(d + j, i)] = -bij;
            m[(i, d + j)] = -bij;
        }
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Solver(Status::NumericalFailure))?;
    let (u, s) = (evd.U(), evd.S());
    let lam: Vec<f64> = (0..n).map(|i| s[i].max(0.0).sqrt()).collect();
    let top = (0..n).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(0);

    let mut candidates: Vec<Vec<C64>> = Vec::with_capacity(settings.n_randomizations + 1);
    let principal: Vec<C64> = (0..d).map(|i| C64::new(u[(i, top)], u[(d + i, top)])).collect();
    candidates.push(unit_phases(&principal));
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut r = vec![0.0; n];
    let mut coef = vec![0.0; n];
    for _ in 0..settings.n_randomizations {
        for v in &mut r {
            *v = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
        }
        // zeta = U diag(lam) U^T r
        for (j, c) in coef.iter_mut().enumerate() {
            *c = lam[j] * (0..n).map(|i| u[(i, j)] * r[i]).sum::<f64>();
        }
        let zeta: Vec<f64> = (0..n).map(|i| (0..n).map(|j| u[(i, j)] * coef[j]).sum()).collect();
        let xi: Vec<C64> = (0..d).map(|i| C64::new(zeta[i], zeta[d + i])).collect();
        candidates.push(unit_phases(&xi));
    }

    let (inc_min, inc_sum) = lift.slack(&inst.gamma, &with_one(incumbent));
    let mut best = (incumbent.to_vec(), inc_min, inc_sum, false);
    let mut best_cand_sum = f64::NEG_INFINITY;
    for cand in candidates {
        let (mn, sm) = lift.slack(&inst.gamma, &with_one(&cand));
        best_cand_sum = best_cand_sum.max(sm);
        if mn > best.1 {
            best = (cand, mn, sm, true);
        }
    }
    let sdp_value = -(res.objective);
    let bound_holds = sdp_value >= best_cand_sum - 1e-6 * (1.0 + sdp_value.abs());
    Ok(SdrOutcome {
        phi: best.0,
        improved: best.3,
        min_slack: best.1,
        sdp_value,
        candidate_value: best_cand_sum,
        bound_holds,
        status: res.status,
    })
}

/// Outcome of the alternating baseline.
#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub point: DesignPoint,
    pub trace: Trace,
    pub status: RunStatus,
    pub rounds: usize,
    /// Every relaxation satisfied its upper-bound check.
    pub bounds_held: bool,
}

/// Alternates [`phi_update_sdr`] and [`w_update`] from the same random start
/// as the SCA method. A round is accepted only if it does not raise the power.
pub fn run_ao(
    inst: &ProblemInstance,
    sca_settings: &ScaSettings,
    settings: &SdrSettings,
    rng_seed: u64,
) -> Result<AoOutcome> {
    settings.validate()?;
    let start = Instant::now();
    let mut point = sca::initialize(inst, sca_settings, rng_seed)?;
    let mut trace = Trace::default();
    let mut power = transmit_power(&point);
    let push = |trace: &mut Trace, iter: usize, p: &DesignPoint, dt: f64| -> Result<()> {
        let rep = check_feasibility(inst, p, sca_settings.tol_sinr, sca_settings.tol_mod)?;
        trace.rows.push(TraceRow {
            iter,
            power: transmit_power(p),
            penalized: transmit_power(p),
            min_margin: rep.min_margin(),
            modulus_gap: rep.modulus_violation,
            solve_time: dt,
            cumulative_time: start.elapsed().as_secs_f64(),
        });
        Ok(())
    };
    push(&mut trace, 0, &point, start.elapsed().as_secs_f64())?;
    let solver = sca_settings.solver();
    let mut status = RunStatus::MaxIters;
    let mut bounds_held = true;
    let mut rounds = 0;
    for round in 1..=settings.ao_max_rounds {
        rounds = round;
        let t0 = Instant::now();
        let sdr = phi_update_sdr(inst, &point.w, &point.phi, settings, sdr_seed(rng_seed, round))?;
        bounds_held &= sdr.bound_holds;
        if !sdr.improved {
            status = RunStatus::Converged;
            break;
        }
        let upd = match w_update(inst, &sdr.phi, &solver) {
            Ok(u) => u,
            Err(Error::Infeasible) => {
                status = RunStatus::Converged;
                break;
            }
            Err(e) => return Err(e),
        };
        if upd.power > power {
            status = RunStatus::Converged;
            break;
        }
        let prev = power;
        point = DesignPoint::new(inst.k, inst.n_t, upd.w, sdr.phi, true)?;
        power = upd.power;
        push(&mut trace, round, &point, t0.elapsed().as_secs_f64())?;
        if (prev - power).abs() / prev.abs().max(1.0) < settings.ao_rel_tol {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(AoOutcome {
        point,
        trace,
        status,
        rounds,
        bounds_held,
    })
}

fn sdr_seed(seed: u64, round: usize) -> u64 {
    crate::harness::splitmix(seed ^ 0x5d52_0000_0000_0000 ^ round as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Socp,
    Sdr,
}

/// Per-iteration flop-order estimate. The SOCP polynomial counts the
/// interior-point cost of one SCA subproblem; the SDR estimate is `N_s^7`.
pub fn complexity_estimate(method: Method, k: usize, n_t: usize, n_s: usize) -> f64 {
    let (k, nt, ns) = (k as f64, n_t as f64, n_s as f64);
    match method {
        Method::Socp => {
            2.0 * (4.0 * k * k + ns).sqrt()
                * (k * k + k * nt + ns)
                * (4.0 * k.powi(5)
                    + 16.0 * k.powi(3) * nt
                    + 8.0 * k * k * ns
                    + 20.0 * k * k * nt * nt
                    + 8.0 * k * nt * ns
                    + 4.0 * ns * ns)
        }
        Method::Sdr => ns.powi(7),
    }
}

/// `min_k (|g_k w_k|^2 / gamma_k - 1 - sum_{l != k} |g_k w_l|^2)`, the
/// randomization selection score.
pub fn min_sinr_slack(inst: &ProblemInstance, dp: &DesignPoint) -> Result<f64> {
    dp.check_dims(inst)?;
    let mut min = f64::INFINITY;
    for k in 0..inst.k {
        let gw = gains(&effective_channel(inst, &dp.phi, k)?, dp);
        let i: f64 = gw
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != k)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        min = min.min(gw[k].norm_sqr() / inst.gamma[k] - 1.0 - i);
    }
    Ok(min)
}
