//! Simultaneous beamformer and phase update by successive convex
//! approximation. Each iteration solves one SOCP built from the surrogates
//! in [`crate::bounds`].

use std::io::Write;
use std::time::Instant;

use irs_conic::{solve, AffineExpr, Cone, ConicProgram, ProgramBuilder, Settings, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{raise_to_targets, w_update, ACCEPT_TOL};
use crate::bounds::{scaled_surrogate_coefficients, ExpansionPoint, Layout, RealAffine, SurrogateKind};
use crate::channel::{ProblemInstance, C64};
use crate::error::{Error, Result};
use crate::sysmodel::{check_feasibility, transmit_power, DesignPoint, DEFAULT_TOL_MOD, DEFAULT_TOL_SINR};

const INIT_STREAM: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaSettings {
    /// Weight of the `-xi ||phi||^2` penalty.
    pub xi: f64,
    pub rel_obj_tol: f64,
    pub max_iters: usize,
    pub scale_and_resolve: bool,
    pub tol_mod: f64,
    pub tol_sinr: f64,
    pub solver_tol: f64,
    /// Residual level at which a subproblem solve that stopped short of
    /// `solver_tol` is still accepted.
    pub solver_accept_tol: f64,
    pub solver_max_iters: usize,
    /// Extra phase draws when the first random start is infeasible.
    pub init_retries: usize,
    /// How the bilinear terms are split before bounding.
    pub split: Split,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            xi: 1e-3,
            rel_obj_tol: 1e-5,
            max_iters: 20,
            scale_and_resolve: true,
            tol_mod: DEFAULT_TOL_MOD,
            tol_sinr: DEFAULT_TOL_SINR,
            solver_tol: 1e-9,
            solver_accept_tol: ACCEPT_TOL,
            solver_max_iters: 100,
            init_retries: 20,
            split: Split::Balanced,
        }
    }
}

impl ScaSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidConfig(format!("xi must be positive, got {}", self.xi)));
        }
        if !(self.rel_obj_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_obj_tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.tol_mod >= 0.0 && self.tol_sinr >= 0.0 && self.solver_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be nonnegative".into()));
        }
        if !(self.solver_accept_tol >= self.solver_tol) {
            return Err(Error::InvalidConfig("solver_accept_tol must be >= solver_tol".into()));
        }
        Ok(())
    }

    pub fn solver(&self) -> Settings {
        Settings::with_tol(self.solver_tol, self.solver_max_iters)
    }
}

/// One iteration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub power: f64,
    pub penalized: f64,
    pub min_margin: f64,
    pub modulus_gap: f64,
    pub solve_time: f64,
    pub cumulative_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: [&str; 7] = [
    "iter",
    "power",
    "penalized",
    "min_sinr_margin",
    "max_modulus_gap",
    "solve_time_s",
    "cumulative_time_s",
];

impl Trace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(TRACE_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                r.iter.to_string(),
                r.power.to_string(),
                r.penalized.to_string(),
                r.min_margin.to_string(),
                r.modulus_gap.to_string(),
                r.solve_time.to_string(),
                r.cumulative_time.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn last_power(&self) -> Option<f64> {
        self.rows.last().map(|r| r.power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Relative objective change fell below the threshold.
    Converged,
    MaxIters,
    /// A subproblem did not solve to optimality.
    Aborted(Status),
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub point: DesignPoint,
    pub trace: Trace,
    pub status: RunStatus,
    pub iterations: usize,
    /// `max_i ||phi_i| - 1|` of the last iterate, before any projection.
    pub modulus_gap_before_projection: f64,
    /// Phases were projected to unit modulus and `w` re-solved.
    pub projected: bool,
    /// Projection was needed but the re-solve was infeasible; `point` is the
    /// relaxed last iterate.
    pub relaxed_fallback: bool,
}

/// `||w||^2 - xi ||phi||^2`.
pub fn penalized_objective(dp: &DesignPoint, xi: f64) -> f64 {
    transmit_power(dp) - xi * dp.phi.iter().map(|p| p.norm_sqr()).sum::<f64>()
}

/// Index map of the subproblem variables `[x; t; tbar; tau]`, where `x` is
/// the real-stacked `(w, phi)` and `t`, `tbar` bound `|Re{g_k w_l}|` and
/// `|Im{g_k w_l}|` for ordered pairs `k != l`.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemLayout {
    pub x: Layout,
}

impl SubproblemLayout {
    pub fn of(inst: &ProblemInstance) -> Self {
        Self { x: Layout::of(inst) }
    }

    pub fn pairs(&self) -> usize {
        self.x.k * (self.x.k - 1)
    }

    pub fn pair(&self, k: usize, l: usize) -> usize {
        debug_assert!(k != l);
        k * (self.x.k - 1) + if l < k { l } else { l - 1 }
    }

    pub fn t(&self, k: usize, l: usize) -> usize {
        self.x.len() + self.pair(k, l)
    }

    pub fn tbar(&self, k: usize, l: usize) -> usize {
        self.x.len() + self.pairs() + self.pair(k, l)
    }

    pub fn tau(&self) -> usize {
        self.x.len() + 2 * self.pairs()
    }

    pub fn len(&self) -> usize {
        self.tau() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> Vec<String> {
        let x = &self.x;
        let mut names = vec![String::new(); self.len()];
        for l in 0..x.k {
            for i in 0..x.n_t {
                names[x.re_w(l, i)] = format!("re_w[{l},{i}]");
                names[x.im_w(l, i)] = format!("im_w[{l},{i}]");
            }
        }
        for s in 0..x.n_s {
            names[x.re_phi(s)] = format!("re_phi[{s}]");
            names[x.im_phi(s)] = format!("im_phi[{s}]");
        }
        for k in 0..x.k {
            for l in (0..x.k).filter(|&l| l != k) {
                names[self.t(k, l)] = format!("t[{k},{l}]");
                names[self.tbar(k, l)] = format!("tbar[{k},{l}]");
            }
        }
        names[self.tau()] = "tau".into();
        names
    }

    /// Full variable vector at `dp` with every slack set to its tight value.
    pub fn tight_point(&self, inst: &ProblemInstance, dp: &DesignPoint) -> Result<Vec<f64>> {
        let mut v = self.x.stack(dp);
        v.resize(self.len(), 0.0);
        for k in 0..inst.k {
            let g = crate::sysmodel::effective_channel(inst, &dp.phi, k)?;
            for l in (0..inst.k).filter(|&l| l != k) {
                let gw: C64 = g.iter().zip(dp.w_k(l)).map(|(a, b)| a * b).sum();
                v[self.t(k, l)] = gw.re.abs();
                v[self.tbar(k, l)] = gw.im.abs();
            }
        }
        v[self.tau()] = transmit_power(dp);
        Ok(v)
    }
}

fn to_expr(a: &RealAffine) -> AffineExpr {
    AffineExpr::new(a.nonzeros().collect(), a.constant)
}

/// Compiles the convex subproblem at the expansion point `ep`:
///
/// * objective `tau - 2 xi Re{phi^(n)H phi} + xi ||phi^(n)||^2`;
/// * `(tau, 1/2, w)` in a rotated cone, so `tau >= ||w||^2`;
/// * per user, `f_k / gamma_k - 1 >= ||L_k||^2 / (2 gamma_k) + sum (t^2 + tbar^2)`
///   as one rotated cone;
/// * per ordered pair, the four majorants below `t` or `tbar`;
/// * `|phi_i| <= 1` as three-dimensional Lorentz cones.
///
/// The surrogates use the plain split of every bilinear term.
pub fn assemble_subproblem(inst: &ProblemInstance, ep: &ExpansionPoint, xi: f64) -> Result<ConicProgram> {
    assemble_subproblem_with(inst, ep, xi, Split::Plain)
}

/// How `g_k w_l` is factored before the polarization bounds are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    /// `g_k w_l` as is.
    Plain,
    /// `(s g_k)(w_l / s)` with `s` chosen so both factors have equal norm at
    /// the expansion point. The subproblem then does not depend on the unit
    /// in which power is measured.
    Balanced,
}

/// [`assemble_subproblem`] with an explicit [`Split`].
pub fn assemble_subproblem_with(
    inst: &ProblemInstance,
    ep: &ExpansionPoint,
    xi: f64,
    split: Split,
) -> Result<ConicProgram> {
    inst.validate()?;
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!("xi must be >= 0, got {xi}")));
    }
    if ep.g.len() != inst.k {
        return Err(Error::Dimension("expansion point does not match instance".into()));
    }
    ep.point.check_dims(inst)?;
    let lay = SubproblemLayout::of(inst);
    let x = lay.x;
    let mut b = ProgramBuilder::new(lay.len());
    b.set_names(lay.names());
    {
        let c = b.objective_mut();
        c[lay.tau()] = 1.0;
        for (s, p) in ep.point.phi.iter().enumerate() {
            c[x.re_phi(s)] = -2.0 * xi * p.re;
            c[x.im_phi(s)] = -2.0 * xi * p.im;
        }
    }
    b.add_offset(xi * ep.point.phi.iter().map(|p| p.norm_sqr()).sum::<f64>());

    let nw = 2 * inst.k * inst.n_t;
    let mut e = vec![AffineExpr::var(lay.tau()), AffineExpr::constant(0.5)];
    e.extend((0..nw).map(AffineExpr::var));
    b.push(Cone::RotatedSoc(2 + nw), e)?;

    for k in 0..inst.k {
        let s = match split {
            Split::Plain => 1.0,
            Split::Balanced => split_f(ep, k),
        };
        let f = scaled_surrogate_coefficients(inst, ep, k, None, SurrogateKind::F, s)?;
        let gk = inst.gamma[k];
        let mut u = to_expr(&f.affine).scaled(1.0 / gk);
        u.constant -= 1.0;
        let mut e = vec![u, AffineExpr::constant(0.5)];
        let s = 1.0 / (2.0 * gk).sqrt();
        e.extend(f.quad.iter().map(|q| to_expr(q).scaled(s)));
        for l in (0..inst.k).filter(|&l| l != k) {
            e.push(AffineExpr::var(lay.t(k, l)));
            e.push(AffineExpr::var(lay.tbar(k, l)));
        }
        let dim = e.len();
        b.push(Cone::RotatedSoc(dim), e)?;
    }

    for k in 0..inst.k {
        for l in (0..inst.k).filter(|&l| l != k) {
            for kind in SurrogateKind::INTERFERENCE {
                let s = match split {
                    Split::Plain => 1.0,
                    Split::Balanced => split_kl(ep, k, l),
                };
                let sur = scaled_surrogate_coefficients(inst, ep, k, Some(l), kind, s)?;
                let slack = match kind {
                    SurrogateKind::Mu | SurrogateKind::MuHat => lay.t(k, l),
                    _ => lay.tbar(k, l),
                };
                let mut u = to_expr(&sur.affine).scaled(-1.0);
                u.terms.push((slack, 1.0));
                let mut e = vec![u, AffineExpr::constant(1.0)];
                e.extend(sur.quad.iter().map(to_expr));
                let dim = e.len();
                b.push(Cone::RotatedSoc(dim), e)?;
            }
        }
    }

    for s in 0..inst.n_s {
        b.push(
            Cone::Soc(3),
            vec![
                AffineExpr::constant(1.0),
                AffineExpr::var(x.re_phi(s)),
                AffineExpr::var(x.im_phi(s)),
            ],
        )?;
    }
    Ok(b.build()?)
}

fn balanced(num: f64, den: f64) -> f64 {
    let s = (num / den).sqrt();
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Split factor equalizing `||s a_k g_k||` and `||w_k / s||`.
fn split_f(ep: &ExpansionPoint, k: usize) -> f64 {
    balanced(vnorm(ep.point.w_k(k)), ep.a[k].norm() * vnorm(&ep.g[k]))
}

/// Split factor equalizing `||s g_k||` and `||w_l / s||`.
fn split_kl(ep: &ExpansionPoint, k: usize, l: usize) -> f64 {
    balanced(vnorm(ep.point.w_k(l)), vnorm(&ep.g[k]))
}

/// Closed-form subproblem sizes `(variables, cones)`.
pub fn expected_counts(k: usize, n_t: usize, n_s: usize) -> (usize, usize) {
    (2 * (k * n_t + n_s + k * (k - 1)) + 1, k + 4 * k * (k - 1) + n_s + 1)
}

/// Random unit-modulus phases with the optimal beamformers for them,
/// redrawing the phases while the beamforming problem is infeasible.
pub fn initialize(inst: &ProblemInstance, settings: &ScaSettings, rng_seed: u64) -> Result<DesignPoint> {
    inst.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    rng.set_stream(INIT_STREAM);
    let solver = settings.solver();
    let attempts = settings.init_retries + 1;
    for _ in 0..attempts {
        let phi: Vec<C64> = (0..inst.n_s)
            .map(|_| C64::from_polar(1.0, rng.random_range(0.0..2.0 * std::f64::consts::PI)))
            .collect();
        match w_update(inst, &phi, &solver) {
            Ok(u) => return DesignPoint::new(inst.k, inst.n_t, u.w, phi, true),
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InitializationInfeasible { attempts })
}

fn trace_row(
    inst: &ProblemInstance,
    dp: &DesignPoint,
    settings: &ScaSettings,
    iter: usize,
    solve_time: f64,
    start: &Instant,
) -> Result<TraceRow> {
    let rep = check_feasibility(inst, dp, settings.tol_sinr, settings.tol_mod)?;
    Ok(TraceRow {
        iter,
        power: transmit_power(dp),
        penalized: penalized_objective(dp, settings.xi),
        min_margin: rep.min_margin(),
        modulus_gap: rep.modulus_violation,
        solve_time,
        cumulative_time: start.elapsed().as_secs_f64(),
    })
}

/// Runs the SCA iteration from [`initialize`] until the relative change of
/// the penalized objective drops below `rel_obj_tol` or `max_iters` is hit.
pub fn run(inst: &ProblemInstance, settings: &ScaSettings, rng_seed: u64) -> Result<ScaOutcome> {
    settings.validate()?;
    let start = Instant::now();
    let mut dp = initialize(inst, settings, rng_seed)?;
    let mut trace = Trace::default();
    trace.rows.push(trace_row(
        inst,
        &dp,
        settings,
        0,
        start.elapsed().as_secs_f64(),
        &start,
    )?);
    let lay = Layout::of(inst);
    let solver = settings.solver();
    let mut f = penalized_objective(&dp, settings.xi);
    let mut status = RunStatus::MaxIters;
    let mut iterations = 0;
    for n in 1..=settings.max_iters {
        let t0 = Instant::now();
        let ep = ExpansionPoint::new(inst, &dp)?;
        let prog = assemble_subproblem_with(inst, &ep, settings.xi, settings.split)?;
        let res = solve(&prog, &solver)?;
        if !(res.is_optimal() || res.accurate_to(settings.solver_accept_tol)) {
            status = RunStatus::Aborted(res.status);
            break;
        }
        let mut next = lay.unstack(&res.x[..lay.len()], false);
        for p in &mut next.phi {
            let m = p.norm();
            if m > 1.0 {
                *p /= m;
            }
        }
        let dt = t0.elapsed().as_secs_f64();
        iterations = n;
        let f_next = penalized_objective(&next, settings.xi);
        dp = next;
        trace.rows.push(trace_row(inst, &dp, settings, n, dt, &start)?);
        let rel = (f - f_next).abs() / f.abs().max(1.0);
        f = f_next;
        if rel < settings.rel_obj_tol {
            status = RunStatus::Converged;
            break;
        }
    }

    let gap = dp.modulus_violation();
    let mut projected = false;
    let mut relaxed_fallback = false;
    let needs_projection = dp.phi.iter().any(|p| p.norm() < 1.0 - settings.tol_mod);
    if needs_projection && settings.scale_and_resolve {
        let phi: Vec<C64> = dp
            .phi
            .iter()
            .map(|p| {
                if p.norm() > 0.0 {
                    p / p.norm()
                } else {
                    C64::new(1.0, 0.0)
                }
            })
            .collect();
        match w_update(inst, &phi, &solver) {
            Ok(u) => {
                dp = DesignPoint::new(inst.k, inst.n_t, u.w, phi, true)?;
                projected = true;
            }
            Err(Error::Infeasible) => relaxed_fallback = true,
            Err(e) => return Err(e),
        }
    } else if needs_projection {
        relaxed_fallback = true;
    }
    if !projected {
        dp.unit_modulus = !relaxed_fallback && gap <= settings.tol_mod;
        raise_to_targets(inst, &mut dp)?;
    }
    Ok(ScaOutcome {
        point: dp,
        trace,
        status,
        iterations,
        modulus_gap_before_projection: gap,
        projected,
        relaxed_fallback,
    })
}
