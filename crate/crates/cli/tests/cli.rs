use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irs-sca"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_instance() -> String {
    root().join("data/tiny_instance.txt").to_string_lossy().into_owned()
}

#[test]
fn solve_tiny_instance_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.txt");
    let o = run(&["solve", "--instance", &tiny_instance(), "--out", sol.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("feasible true"));
    let v = run(&[
        "verify",
        "--instance",
        &tiny_instance(),
        "--solution",
        sol.to_str().unwrap(),
    ]);
    assert!(v.status.success(), "{}", stderr(&v));
}

#[test]
fn baseline_solves_tiny_instance() {
    let o = run(&[
        "solve",
        "--instance",
        &tiny_instance(),
        "--algorithm",
        "sdr-ao",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("feasible true"));
}

#[test]
fn corrupted_solution_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.txt");
    let o = run(&["solve", "--instance", &tiny_instance(), "--out", sol.to_str().unwrap()]);
    assert!(o.status.success());
    // halve every beamformer entry: SINRs drop well below target
    let text = fs::read_to_string(&sol).unwrap();
    let mut out = Vec::new();
    let mut in_w = false;
    for line in text.lines() {
        if line == "w" || line == "phi" {
            in_w = line == "w";
            out.push(line.to_string());
            continue;
        }
        if in_w {
            let halved: Vec<String> = line
                .split_whitespace()
                .map(|z| {
                    let (re, im) = z.split_once(',').unwrap();
                    let re: f64 = re.parse().unwrap();
                    let im: f64 = im.parse().unwrap();
                    format!("{},{}", re / 2.0, im / 2.0)
                })
                .collect();
            out.push(halved.join(" "));
        } else {
            out.push(line.to_string());
        }
    }
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, out.join("\n") + "\n").unwrap();
    let v = run(&[
        "verify",
        "--instance",
        &tiny_instance(),
        "--solution",
        bad.to_str().unwrap(),
    ]);
    assert!(!v.status.success());
    assert!(stderr(&v).starts_with("error[infeasible-solution]"), "{}", stderr(&v));
}

#[test]
fn malformed_solution_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "not a solution\n").unwrap();
    let v = run(&[
        "verify",
        "--instance",
        &tiny_instance(),
        "--solution",
        bad.to_str().unwrap(),
    ]);
    assert!(!v.status.success());
    assert!(stderr(&v).starts_with("error[parse-error]"), "{}", stderr(&v));
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = root().join("configs/tiny.toml");
    for d in [&a, &b] {
        let o = run(&[
            "generate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let name = "tiny_ns4_g10_r0.txt";
    let x = fs::read_to_string(a.path().join(name)).unwrap();
    assert_eq!(x, fs::read_to_string(b.path().join(name)).unwrap());
    assert_eq!(x, fs::read_to_string(root().join("data/tiny_instance.txt")).unwrap());
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "k = 2\nn_t = 2\nbogus = 1\n").unwrap();
    let o = run(&["benchmark", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.starts_with("error[config-error]") && e.contains("line 3"), "{e}");
}

#[test]
fn benchmark_writes_figure_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig3_small.toml");
    // the shape of configs/fig3.toml at a size that runs in seconds
    let shipped = fs::read_to_string(root().join("configs/fig3.toml")).unwrap();
    let small = shipped
        .replace("n_s = [16, 25, 36, 49, 64]", "n_s = [16, 25]")
        .replace("n_realizations = 25", "n_realizations = 1");
    assert_ne!(small, shipped);
    fs::write(&cfg, small).unwrap();
    let out = dir.path().join("res");
    let o = run(&[
        "benchmark",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["fig2_convergence.csv", "fig3_power_vs_ns.csv", "fig4_runtime_vs_ns.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.lines().count() > 2, "{f}: {text}");
    }
}

#[test]
fn shipped_configs_are_valid() {
    for name in ["example", "fig2", "fig3", "fig4", "tiny"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = root().join(format!("configs/{name}.toml"));
        let o = run(&[
            "generate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
}
