//! `irs-sca`: generate instances, solve them, run benchmarks and verify
//! solutions.
//!
//! Failures print `error[<category>]: <message>` on stderr and exit with a
//! nonzero code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irs_sca::baselines::run_ao;
use irs_sca::channel::{generate_instance, ProblemInstance};
use irs_sca::harness::{
    algorithm_seed, db_to_linear, emit_figures, instance_seed, power_to_dbm, run_experiment, Algorithm,
    ExperimentConfig,
};
use irs_sca::sca;
use irs_sca::sysmodel::{check_feasibility, transmit_power, DesignPoint, FeasibilityReport};

#[derive(Parser)]
#[command(
    name = "irs-sca",
    version,
    about = "Beamforming and IRS phase design by successive convex approximation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write one instance file per (IRS size, SINR target, realization).
    Generate,
    /// Run one algorithm on one instance and print its feasibility report.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// `sca` or `sdr-ao`.
        #[arg(long, default_value = "sca")]
        algorithm: String,
    },
    /// Run the Monte-Carlo experiment and write the figure CSVs.
    Benchmark {
        /// 100 realizations, 1000 randomizations, IRS sizes up to 100.
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a solution against an instance.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
}

#[derive(Debug)]
struct Failure {
    category: String,
    message: String,
}

impl From<irs_sca::Error> for Failure {
    fn from(e: irs_sca::Error) -> Self {
        Failure {
            category: e.category().into(),
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        category: "io-error".into(),
        message: format!("{}: {e}", path.display()),
    }
}

fn infeasible(message: String) -> Failure {
    Failure {
        category: "infeasible-solution".into(),
        message,
    }
}

type CliResult = Result<(), Failure>;

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn format_report(inst: &ProblemInstance, dp: &DesignPoint, rep: &FeasibilityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "user sinr_db target_db margin");
    for k in 0..inst.k {
        let _ = writeln!(
            s,
            "{k} {:.4} {:.4} {:.3e}",
            10.0 * rep.sinr[k].log10(),
            10.0 * inst.gamma[k].log10(),
            rep.margin[k]
        );
    }
    let _ = writeln!(s, "power_dbm {:.4}", power_to_dbm(transmit_power(dp)));
    let _ = writeln!(s, "modulus_violation {:.3e}", rep.modulus_violation);
    let _ = writeln!(s, "feasible {}", rep.feasible);
    s
}

fn generate(common: &Common) -> CliResult {
    let cfg = load_config(common)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("instances"));
    for &n_s in &cfg.n_s {
        for &g in &cfg.gamma_db {
            for r in 0..cfg.n_realizations {
                let gamma = vec![db_to_linear(g); cfg.k];
                let seed = instance_seed(cfg.master_seed, r);
                let inst = generate_instance(&cfg.scenario, &cfg.fading, cfg.k, cfg.n_t, n_s, &gamma, seed)?;
                let path = dir.join(format!("{}_ns{n_s}_g{g}_r{r}.txt", cfg.name));
                write(&path, &inst.to_text())?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn solve(common: &Common, instance: &Path, algorithm: &str) -> CliResult {
    let cfg = load_config(common)?;
    let alg = Algorithm::parse(algorithm)?;
    let inst = ProblemInstance::from_text(&read(instance)?)?;
    let seed = algorithm_seed(common.seed.unwrap_or(cfg.master_seed));
    let dp = match alg {
        Algorithm::Sca => sca::run(&inst, &cfg.sca, seed)?.point,
        Algorithm::SdrAo => run_ao(&inst, &cfg.sca, &cfg.sdr, seed)?.point,
    };
    let rep = check_feasibility(&inst, &dp, cfg.sca.tol_sinr, cfg.sca.tol_mod)?;
    print!("{}", format_report(&inst, &dp, &rep));
    if let Some(out) = &common.out {
        write(out, &dp.to_text())?;
    }
    if !rep.feasible {
        return Err(infeasible(format!("{} returned an infeasible point", alg.as_str())));
    }
    Ok(())
}

fn benchmark(common: &Common, paper_scale: bool, workers: Option<usize>) -> CliResult {
    let mut cfg = load_config(common)?;
    if paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    let report = run_experiment(&cfg)?;
    for path in emit_figures(&report, &cfg.out_dir)? {
        println!("wrote {}", path.display());
    }
    println!("n_s gamma_db algorithm mean_power_dbm mean_time_s n_ok failures");
    for a in &report.aggregates {
        println!(
            "{} {} {} {:.3} {:.3} {} {}",
            a.n_s,
            a.gamma_db,
            a.algorithm.as_str(),
            a.mean_power_dbm,
            a.mean_time_s,
            a.n_ok,
            a.failures
        );
    }
    let bad = report.raw.iter().filter(|r| r.status == "infeasible-solution").count();
    if bad > 0 {
        return Err(infeasible(format!("{bad} runs returned infeasible points")));
    }
    Ok(())
}

fn verify(common: &Common, instance: &Path, solution: &Path) -> CliResult {
    let cfg = load_config(common)?;
    let inst = ProblemInstance::from_text(&read(instance)?)?;
    let dp = DesignPoint::from_text(&read(solution)?)?;
    dp.check_dims(&inst)?;
    let finite = dp.w.iter().chain(&dp.phi).all(|v| v.re.is_finite() && v.im.is_finite());
    if !finite {
        return Err(infeasible("solution has non-finite entries".into()));
    }
    let rep = check_feasibility(&inst, &dp, cfg.sca.tol_sinr, cfg.sca.tol_mod)?;
    let text = format_report(&inst, &dp, &rep);
    print!("{text}");
    if let Some(out) = &common.out {
        write(out, &text)?;
    }
    if !rep.feasible {
        let worst = rep.min_margin();
        return Err(infeasible(format!(
            "minimum SINR margin {worst:.3e}, modulus violation {:.3e}",
            rep.modulus_violation
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Generate => generate(&cli.common),
        Cmd::Solve { instance, algorithm } => solve(&cli.common, instance, algorithm),
        Cmd::Benchmark { paper_scale, workers } => benchmark(&cli.common, *paper_scale, *workers),
        Cmd::Verify { instance, solution } => verify(&cli.common, instance, solution),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.category, f.message);
            ExitCode::FAILURE
        }
    }
}
