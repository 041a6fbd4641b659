//! Monte-Carlo experiments comparing the SCA method with the alternating
//! baseline, and CSV emission for the convergence, power and runtime plots.
//!
//! Powers are reported in dBm. Channels are divided by the noise amplitude
//! when instances are generated, so `||w||^2` is already the transmit power
//! in watts and `power_dbm = 10 log10(||w||^2) + 30`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use irs_conic::ConicProgram;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_ao, SdrSettings};
use crate::channel::{dbm_to_watts, generate_instance, watts_to_dbm, FadingParams, ProblemInstance, ScenarioGeometry};
use crate::error::{Error, Result};
use crate::sca::{self, expected_counts, RunStatus, ScaSettings, Trace};
use crate::sysmodel::check_feasibility;

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the channel realization `r`; shared by every sweep point so that
/// sweeps use common random numbers.
pub fn instance_seed(master: u64, r: usize) -> u64 {
    splitmix(master ^ splitmix(r as u64))
}

/// Seed of the algorithms' random start; all algorithms use the same one.
pub fn algorithm_seed(instance_seed: u64) -> u64 {
    splitmix(instance_seed ^ 0xa1b2_c3d4_e5f6_0718)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_dbm(power_w: f64) -> f64 {
    watts_to_dbm(power_w)
}

pub fn dbm_to_power(dbm: f64) -> f64 {
    dbm_to_watts(dbm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "sca")]
    Sca,
    #[serde(rename = "sdr-ao")]
    SdrAo,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Sca => "sca",
            Algorithm::SdrAo => "sdr-ao",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sca" => Ok(Algorithm::Sca),
            "sdr-ao" | "ao" | "sdr" => Ok(Algorithm::SdrAo),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm {other:?} (expected sca or sdr-ao)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub k: usize,
    pub n_t: usize,
    /// IRS sizes to sweep; one entry means no sweep.
    pub n_s: Vec<usize>,
    /// SINR targets in dB, common to all users.
    pub gamma_db: Vec<f64>,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    pub scenario: ScenarioGeometry,
    pub fading: FadingParams,
    pub sca: ScaSettings,
    pub sdr: SdrSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            k: 4,
            n_t: 4,
            n_s: vec![16],
            gamma_db: vec![10.0],
            n_realizations: 25,
            master_seed: 1,
            algorithms: vec![Algorithm::Sca, Algorithm::SdrAo],
            out_dir: PathBuf::from("results"),
            workers: 0,
            scenario: ScenarioGeometry::default(),
            fading: FadingParams::default(),
            sca: ScaSettings::default(),
            sdr: SdrSettings::default(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            Error::InvalidConfig(format!("line {line}: {}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_t == 0 {
            return Err(Error::InvalidConfig("k and n_t must be >= 1".into()));
        }
        if self.n_s.is_empty() || self.n_s.contains(&0) {
            return Err(Error::InvalidConfig(
                "n_s must be a nonempty list of positive sizes".into(),
            ));
        }
        if self.gamma_db.is_empty() || self.gamma_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidConfig(
                "gamma_db must be a nonempty list of finite values".into(),
            ));
        }
        if self.n_realizations == 0 {
            return Err(Error::InvalidConfig("n_realizations must be >= 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("algorithms must not be empty".into()));
        }
        self.scenario.validate()?;
        self.fading.validate()?;
        self.sca.validate()?;
        self.sdr.validate()?;
        Ok(())
    }

    /// Full-size protocol: 100 realizations, 1000 randomizations, and IRS
    /// sizes up to 100 elements when sweeping.
    pub fn paper_scale(mut self) -> Self {
        self.n_realizations = 100;
        self.sdr.n_randomizations = 1000;
        if self.n_s.len() > 1 {
            for extra in [81, 100] {
                if !self.n_s.contains(&extra) {
                    self.n_s.push(extra);
                }
            }
            self.n_s.sort_unstable();
        }
        let order = 2 * (self.n_s.iter().max().copied().unwrap_or(0) + 1);
        self.sdr.psd_cap = self.sdr.psd_cap.max(order);
        self
    }

    fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

/// One (sweep point, realization, algorithm) result.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub n_s: usize,
    pub gamma_db: f64,
    pub realization: usize,
    pub algorithm: Algorithm,
    pub instance_hash: String,
    /// `ok` or an error category.
    pub status: String,
    pub power_w: f64,
    pub power_dbm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    pub modulus_gap: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub n_s: usize,
    pub gamma_db: f64,
    pub algorithm: Algorithm,
    pub mean_power_dbm: f64,
    pub std_power_dbm: f64,
    pub mean_iterations: f64,
    pub mean_time_s: f64,
    /// Realizations that entered the averages.
    pub n_ok: usize,
    /// Realizations where this algorithm failed.
    pub failures: usize,
}

/// Mean power per iteration, with finished runs held at their final value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub algorithm: Algorithm,
    pub gamma_db: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub raw: Vec<RawRow>,
    pub aggregates: Vec<AggregateRow>,
    pub convergence: Vec<ConvergenceRow>,
    /// Realizations excluded from every average because some algorithm
    /// failed on them, per `(n_s, gamma_db)`.
    pub excluded: Vec<(usize, f64, usize)>,
}

impl ExperimentReport {
    pub fn aggregate(&self, n_s: usize, gamma_db: f64, alg: Algorithm) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.n_s == n_s && a.gamma_db == gamma_db && a.algorithm == alg)
    }
}

struct JobResult {
    rows: Vec<RawRow>,
    traces: Vec<(Algorithm, Trace)>,
}

fn run_job(cfg: &ExperimentConfig, n_s: usize, gamma_db: f64, r: usize) -> JobResult {
    let seed = instance_seed(cfg.master_seed, r);
    let gamma = vec![db_to_linear(gamma_db); cfg.k];
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let inst = match generate_instance(&cfg.scenario, &cfg.fading, cfg.k, cfg.n_t, n_s, &gamma, seed) {
        Ok(i) => i,
        Err(e) => {
            for &alg in &cfg.algorithms {
                rows.push(failed_row(n_s, gamma_db, r, alg, String::new(), e.category()));
            }
            return JobResult { rows, traces };
        }
    };
    let hash = inst.digest();
    let alg_seed = algorithm_seed(seed);
    for &alg in &cfg.algorithms {
        let t0 = Instant::now();
        let outcome = match alg {
            Algorithm::Sca => sca::run(&inst, &cfg.sca, alg_seed).map(|o| {
                let conv = o.status == RunStatus::Converged;
                (o.point, o.trace, o.iterations, conv, o.modulus_gap_before_projection)
            }),
            Algorithm::SdrAo => run_ao(&inst, &cfg.sca, &cfg.sdr, alg_seed).map(|o| {
                let conv = o.status == RunStatus::Converged;
                let gap = o.point.modulus_violation();
                (o.point, o.trace, o.rounds, conv, gap)
            }),
        };
        let dt = t0.elapsed().as_secs_f64();
        match outcome {
            Ok((point, trace, iterations, converged, gap)) => {
                let power = crate::sysmodel::transmit_power(&point);
                let feasible = check_feasibility(&inst, &point, cfg.sca.tol_sinr, cfg.sca.tol_mod)
                    .map(|r| r.feasible)
                    .unwrap_or(false);
                rows.push(RawRow {
                    n_s,
                    gamma_db,
                    realization: r,
                    algorithm: alg,
                    instance_hash: hash.clone(),
                    status: if feasible {
                        "ok".into()
                    } else {
                        "infeasible-solution".into()
                    },
                    power_w: power,
                    power_dbm: power_to_dbm(power),
                    iterations,
                    converged,
                    feasible,
                    modulus_gap: gap,
                    wall_time_s: dt,
                });
                traces.push((alg, trace));
            }
            Err(e) => rows.push(failed_row(n_s, gamma_db, r, alg, hash.clone(), e.category())),
        }
    }
    JobResult { rows, traces }
}

fn failed_row(n_s: usize, gamma_db: f64, r: usize, alg: Algorithm, hash: String, cat: &str) -> RawRow {
    RawRow {
        n_s,
        gamma_db,
        realization: r,
        algorithm: alg,
        instance_hash: hash,
        status: cat.to_string(),
        power_w: f64::NAN,
        power_dbm: f64::NAN,
        iterations: 0,
        converged: false,
        feasible: false,
        modulus_gap: f64::NAN,
        wall_time_s: 0.0,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Runs every algorithm on every (IRS size, target, realization) triple.
/// A realization is left out of all averages at a sweep point if any
/// algorithm failed on it, so averages are always paired.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &n_s in &cfg.n_s {
        for &g in &cfg.gamma_db {
            for r in 0..cfg.n_realizations {
                jobs.push((n_s, g, r));
            }
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<JobResult>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = cfg.worker_count().min(jobs.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(n_s, g, r)) = jobs.get(i) else { break };
                let res = run_job(cfg, n_s, g, r);
                results.lock().expect("no worker panicked")[i] = Some(res);
            });
        }
    });
    let results: Vec<JobResult> = results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect();

    let mut raw = Vec::new();
    let mut aggregates = Vec::new();
    let mut excluded = Vec::new();
    let mut convergence = Vec::new();
    let fig2_ns = cfg.n_s[0];
    for &n_s in &cfg.n_s {
        for &g in &cfg.gamma_db {
            let point: Vec<(usize, &JobResult)> = jobs
                .iter()
                .zip(&results)
                .filter(|((ns, gg, _), _)| *ns == n_s && *gg == g)
                .map(|((_, _, r), res)| (*r, res))
                .collect();
            let good: Vec<&JobResult> = point
                .iter()
                .filter(|(_, res)| res.rows.iter().all(|row| row.status == "ok"))
                .map(|(_, res)| *res)
                .collect();
            excluded.push((n_s, g, point.len() - good.len()));
            for &alg in &cfg.algorithms {
                let ok_rows: Vec<&RawRow> = good
                    .iter()
                    .flat_map(|res| res.rows.iter().filter(|row| row.algorithm == alg))
                    .collect();
                let failures = point
                    .iter()
                    .flat_map(|(_, res)| res.rows.iter())
                    .filter(|row| row.algorithm == alg && row.status != "ok")
                    .count();
                let dbm: Vec<f64> = ok_rows.iter().map(|r| r.power_dbm).collect();
                let nan_if_empty = |v: f64| if ok_rows.is_empty() { f64::NAN } else { v };
                aggregates.push(AggregateRow {
                    n_s,
                    gamma_db: g,
                    algorithm: alg,
                    mean_power_dbm: nan_if_empty(mean(&dbm)),
                    std_power_dbm: nan_if_empty(std_dev(&dbm)),
                    mean_iterations: nan_if_empty(mean(
                        &ok_rows.iter().map(|r| r.iterations as f64).collect::<Vec<_>>(),
                    )),
                    mean_time_s: nan_if_empty(mean(&ok_rows.iter().map(|r| r.wall_time_s).collect::<Vec<_>>())),
                    n_ok: ok_rows.len(),
                    failures,
                });
                if n_s == fig2_ns && !good.is_empty() {
                    let traces: Vec<&Trace> = good
                        .iter()
                        .flat_map(|res| res.traces.iter().filter(|(a, _)| *a == alg).map(|(_, t)| t))
                        .collect();
                    let len = traces.iter().map(|t| t.rows.len()).max().unwrap_or(0);
                    for it in 0..len {
                        let vals: Vec<f64> = traces
                            .iter()
                            .map(|t| power_to_dbm(t.rows[it.min(t.rows.len() - 1)].power))
                            .collect();
                        convergence.push(ConvergenceRow {
                            iter: it,
                            algorithm: alg,
                            gamma_db: g,
                            power_dbm: mean(&vals),
                        });
                    }
                }
            }
            for (_, res) in point {
                raw.extend(res.rows.iter().cloned());
            }
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        raw,
        aggregates,
        convergence,
        excluded,
    })
}

/// `true` iff the compiled subproblem has the closed-form number of
/// variables and cones for the instance dimensions.
pub fn validate_counts(inst: &ProblemInstance, prog: &ConicProgram) -> bool {
    let (nv, nc) = expected_counts(inst.k, inst.n_t, inst.n_s);
    prog.num_vars() == nv && prog.num_cones() == nc
}

pub const FIG2_FILE: &str = "fig2_convergence.csv";
pub const FIG3_FILE: &str = "fig3_power_vs_ns.csv";
pub const FIG4_FILE: &str = "fig4_runtime_vs_ns.csv";
pub const RAW_FILE: &str = "raw_rows.csv";
pub const PLOT_SCRIPT: &str = "plot_figures.py";

fn schema_line(w: &mut impl Write, name: &str) -> Result<()> {
    writeln!(w, "# schema: irs-sca/{name} v1")?;
    Ok(())
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

fn write_csv(path: &Path, schema: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    schema_line(&mut f, schema)?;
    let mut wr = csv::Writer::from_writer(f);
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes the three figure CSVs, the raw rows and a plotting script into
/// `out_dir`; returns the paths written. Lines starting with `#` carry the
/// schema version.
pub fn emit_figures(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.raw.is_empty() {
        return Err(Error::InvalidArgument("report is empty".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let p = out_dir.join(FIG2_FILE);
    write_csv(
        &p,
        "fig2",
        &["iter", "algorithm", "gamma_db", "power_dbm"],
        report
            .convergence
            .iter()
            .map(|r| {
                vec![
                    r.iter.to_string(),
                    r.algorithm.as_str().into(),
                    num(r.gamma_db),
                    num(r.power_dbm),
                ]
            })
            .collect(),
    )?;
    written.push(p);

    let p = out_dir.join(FIG3_FILE);
    write_csv(
        &p,
        "fig3",
        &[
            "n_s",
            "gamma_db",
            "algorithm",
            "mean_power_dbm",
            "std_power_dbm",
            "n_ok",
            "failures",
        ],
        report
            .aggregates
            .iter()
            .map(|a| {
                vec![
                    a.n_s.to_string(),
                    num(a.gamma_db),
                    a.algorithm.as_str().into(),
                    num(a.mean_power_dbm),
                    num(a.std_power_dbm),
                    a.n_ok.to_string(),
                    a.failures.to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(p);

    let p = out_dir.join(FIG4_FILE);
    write_csv(
        &p,
        "fig4",
        &["n_s", "gamma_db", "algorithm", "mean_time_s", "mean_iterations", "n_ok"],
        report
            .aggregates
            .iter()
            .map(|a| {
                vec![
                    a.n_s.to_string(),
                    num(a.gamma_db),
                    a.algorithm.as_str().into(),
                    num(a.mean_time_s),
                    num(a.mean_iterations),
                    a.n_ok.to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(p);

    let p = out_dir.join(RAW_FILE);
    write_csv(
        &p,
        "raw",
        &[
            "n_s",
            "gamma_db",
            "realization",
            "algorithm",
            "instance_hash",
            "status",
            "power_w",
            "power_dbm",
            "iterations",
            "converged",
            "feasible",
            "modulus_gap",
            "wall_time_s",
        ],
        report
            .raw
            .iter()
            .map(|r| {
                vec![
                    r.n_s.to_string(),
                    num(r.gamma_db),
                    r.realization.to_string(),
                    r.algorithm.as_str().into(),
                    r.instance_hash.clone(),
                    r.status.clone(),
                    num(r.power_w),
                    num(r.power_dbm),
                    r.iterations.to_string(),
                    r.converged.to_string(),
                    r.feasible.to_string(),
                    num(r.modulus_gap),
                    num(r.wall_time_s),
                ]
            })
            .collect(),
    )?;
    written.push(p);

    let p = out_dir.join(PLOT_SCRIPT);
    fs::write(&p, PLOT_SOURCE)?;
    written.push(p);
    Ok(written)
}

const PLOT_SOURCE: &str = include_str!("plot_figures.py");
