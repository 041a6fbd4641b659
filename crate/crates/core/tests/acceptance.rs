//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use irs_conic::{
    solve, verify_certificate, AffineExpr, Cone, ConicProgram, CscMatrix, ProgramBuilder, Settings, Status,
};
use irs_sca::baselines::{complexity_estimate, Method};
use irs_sca::bounds::{f_k, mu, mu_hat, nu, nu_hat, ExpansionPoint};
use irs_sca::channel::{complex_normal, generate_instance, CMat, FadingParams, ProblemInstance, ScenarioGeometry};
use irs_sca::harness::{db_to_linear, run_experiment, validate_counts, AggregateRow, Algorithm, ExperimentConfig};
use irs_sca::sca::{assemble_subproblem, run, RunStatus, ScaSettings};
use irs_sca::sysmodel::{check_feasibility, effective_channel, transmit_power, DesignPoint};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_instance(rng: &mut ChaCha8Rng, k: usize, n_t: usize, n_s: usize) -> ProblemInstance {
    let mut cm = |r, c| CMat::from_fn(r, c, |_, _| complex_normal(rng));
    let h_ts = cm(n_s, n_t);
    let h_t = cm(k, n_t);
    let h_s = cm(k, n_s);
    ProblemInstance {
        k,
        n_t,
        n_s,
        h_ts,
        h_t,
        h_s,
        gamma: vec![1.0; k],
    }
}

fn random_point(rng: &mut ChaCha8Rng, inst: &ProblemInstance) -> DesignPoint {
    let w = (0..inst.k * inst.n_t).map(|_| complex_normal(rng)).collect();
    let phi = (0..inst.n_s)
        .map(|_| C64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    DesignPoint::new(inst.k, inst.n_t, w, phi, false).unwrap()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Values the surrogates must bound: `|g_k w_k|^2` for the signal term and
/// `Re`, `-Re`, `Im`, `-Im` of `g_k w_l` for the interference terms.
fn targets(inst: &ProblemInstance, dp: &DesignPoint, k: usize, l: usize) -> (f64, [f64; 4]) {
    let g = effective_channel(inst, &dp.phi, k).unwrap();
    let s = dot(&g, dp.w_k(k)).norm_sqr();
    let v = dot(&g, dp.w_k(l));
    (s, [v.re, -v.re, v.im, -v.im])
}

type Upper = fn(&ProblemInstance, &DesignPoint, &ExpansionPoint, usize, usize) -> irs_sca::Result<f64>;
const UPPER: [Upper; 4] = [mu, mu_hat, nu, nu_hat];

fn surrogate_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid: Vec<(usize, usize, usize)> = [1, 2, 4]
        .iter()
        .flat_map(|&k| {
            [1, 2, 4]
                .iter()
                .flat_map(move |&n_t| [1, 4, 16].iter().map(move |&n_s| (k, n_t, n_s)))
        })
        .collect();
    let tol = |v: f64| 1e-10 * (1.0 + v.abs());
    let mut worst_bound = 0.0f64;
    let mut worst_tight = 0.0f64;
    let mut bad = 0usize;
    let trials = 10_000;
    for t in 0..trials {
        let (k, n_t, n_s) = grid[t % grid.len()];
        let inst = random_instance(&mut rng, k, n_t, n_s);
        let dp = random_point(&mut rng, &inst);
        let e = random_point(&mut rng, &inst);
        let ep = ExpansionPoint::new(&inst, &e).unwrap();
        for a in 0..k {
            let (sig, _) = targets(&inst, &dp, a, a);
            let (sig0, _) = targets(&inst, &e, a, a);
            let fv = f_k(&inst, &dp, &ep, a).unwrap();
            let f0 = f_k(&inst, &e, &ep, a).unwrap();
            worst_bound = worst_bound.max((fv - sig) / (1.0 + sig.abs()));
            worst_tight = worst_tight.max((f0 - sig0).abs() / (1.0 + sig0.abs()));
            bad += usize::from(fv > sig + tol(sig)) + usize::from((f0 - sig0).abs() > tol(sig0));
            for b in (0..k).filter(|&b| b != a) {
                let (_, tv) = targets(&inst, &dp, a, b);
                let (_, tv0) = targets(&inst, &e, a, b);
                for ((f, v), v0) in UPPER.iter().zip(tv).zip(tv0) {
                    let u = f(&inst, &dp, &ep, a, b).unwrap();
                    let u0 = f(&inst, &e, &ep, a, b).unwrap();
                    worst_bound = worst_bound.max((v - u) / (1.0 + v.abs()));
                    worst_tight = worst_tight.max((u0 - v0).abs() / (1.0 + v0.abs()));
                    bad += usize::from(u < v - tol(v)) + usize::from((u0 - v0).abs() > tol(v0));
                }
            }
        }
    }
    outcome(
        bad == 0,
        format!("{trials} triples, violations {bad}, worst bound excess {worst_bound:.1e}, worst tightness error {worst_tight:.1e}"),
    )
}

fn structural_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut dims = Vec::new();
    for k in [1, 2, 4] {
        for n_t in [1, 2, 4] {
            for n_s in [1, 4, 16] {
                dims.push((k, n_t, n_s));
            }
        }
    }
    dims.push((4, 4, 100));
    dims.push((6, 6, 64));
    let mut mismatches = Vec::new();
    for &(k, n_t, n_s) in &dims {
        let inst = random_instance(&mut rng, k, n_t, n_s);
        let ep = ExpansionPoint::new(&inst, &random_point(&mut rng, &inst)).unwrap();
        let prog = assemble_subproblem(&inst, &ep, 1e-3).unwrap();
        let vars = 2 * (k * n_t + n_s + k * (k - 1)) + 1;
        let cones = k + 4 * k * (k - 1) + n_s + 1;
        if prog.num_vars() != vars || prog.num_cones() != cones || !validate_counts(&inst, &prog) {
            mismatches.push(format!(
                "({k},{n_t},{n_s}): {} vars {} cones",
                prog.num_vars(),
                prog.num_cones()
            ));
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{} dimension triples, mismatches {:?}", dims.len(), mismatches),
    )
}

/// SCA on 25 instances with K = N_t = 4, N_s = 16 at 10 dB.
fn descent_runs() -> Vec<(ProblemInstance, irs_sca::sca::ScaOutcome)> {
    let settings = ScaSettings::default();
    (0..25u64)
        .map(|seed| {
            let inst = generate_instance(
                &ScenarioGeometry::default(),
                &FadingParams::default(),
                4,
                4,
                16,
                &[db_to_linear(10.0); 4],
                1000 + seed,
            )
            .unwrap();
            let out = run(&inst, &settings, seed).unwrap();
            (inst, out)
        })
        .collect()
}

fn descent(runs: &[(ProblemInstance, irs_sca::sca::ScaOutcome)]) -> Outcome {
    let mut increases = 0;
    let mut worst = 0.0f64;
    let mut converged = 0;
    for (_, out) in runs {
        for w in out.trace.rows.windows(2) {
            let rise = (w[1].penalized - w[0].penalized) / w[0].penalized.abs().max(1.0);
            worst = worst.max(rise);
            increases += usize::from(rise > 1e-7);
        }
        converged += usize::from(out.status == RunStatus::Converged && out.iterations <= 20);
    }
    let frac = converged as f64 / runs.len() as f64;
    outcome(
        increases == 0 && frac >= 0.9,
        format!(
            "monotonicity violations {increases} (worst relative rise {worst:.1e}), converged within 20 iterations {converged}/{}",
            runs.len()
        ),
    )
}

fn unit_modulus(runs: &[(ProblemInstance, irs_sca::sca::ScaOutcome)]) -> Outcome {
    let settings = ScaSettings::default();
    let tight = runs
        .iter()
        .filter(|(_, o)| o.modulus_gap_before_projection <= 1e-3)
        .count();
    let worst = runs
        .iter()
        .map(|(_, o)| o.modulus_gap_before_projection)
        .fold(0.0, f64::max);
    let infeasible = runs
        .iter()
        .filter(|(inst, o)| {
            !check_feasibility(inst, &o.point, settings.tol_sinr, settings.tol_mod)
                .unwrap()
                .feasible
        })
        .count();
    let frac = tight as f64 / runs.len() as f64;
    outcome(
        frac >= 0.95 && infeasible == 0,
        format!(
            "gap <= 1e-3 in {tight}/{} (worst {worst:.1e}), infeasible returns {infeasible}",
            runs.len()
        ),
    )
}

/// Minimum power over a phase grid, with the single-user optimal beamformer
/// `w = sqrt(gamma) g^H / ||g||^2` in closed form.
fn grid_oracle(inst: &ProblemInstance, steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..steps {
        for b in 0..steps {
            let phi = [
                C64::from_polar(1.0, 2.0 * PI * a as f64 / steps as f64),
                C64::from_polar(1.0, 2.0 * PI * b as f64 / steps as f64),
            ];
            let mut g2 = 0.0;
            for i in 0..inst.n_t {
                let mut v = inst.h_t.get(0, i);
                for (s, p) in phi.iter().enumerate() {
                    v += inst.h_s.get(0, s) * p * inst.h_ts.get(s, i);
                }
                g2 += v.norm_sqr();
            }
            best = best.min(inst.gamma[0] / g2);
        }
    }
    best
}

fn oracle_equivalence() -> Outcome {
    let settings = ScaSettings::default();
    // two elements do not form a square array, so the IRS links are Rayleigh
    let fading = FadingParams {
        rician_bs_irs: 0.0,
        rician_irs_user: 0.0,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    let mut fails = 0;
    for i in 0..10u64 {
        let n_t = 1 + (i as usize % 2);
        let inst = generate_instance(
            &ScenarioGeometry::default(),
            &fading,
            1,
            n_t,
            2,
            &[db_to_linear(10.0)],
            2000 + i,
        )
        .unwrap();
        let out = run(&inst, &settings, i).unwrap();
        let p = transmit_power(&out.point);
        let o = grid_oracle(&inst, 720);
        let rel = (p - o).abs() / o;
        worst = worst.max(rel);
        fails += usize::from(rel > 0.01);
    }
    outcome(
        fails == 0,
        format!("10 instances, outside 1%: {fails}, worst relative difference {worst:.1e}"),
    )
}

fn mean_of(aggs: &[AggregateRow], n_s: usize, g: f64, alg: Algorithm) -> &AggregateRow {
    aggs.iter()
        .find(|a| a.n_s == n_s && a.gamma_db == g && a.algorithm == alg)
        .expect("aggregate present")
}

fn dominance() -> Outcome {
    let cfg = ExperimentConfig {
        k: 4,
        n_t: 4,
        n_s: vec![16],
        gamma_db: vec![10.0, 20.0],
        n_realizations: 25,
        master_seed: 3,
        workers: 1,
        ..Default::default()
    };
    let rep = run_experiment(&cfg).unwrap();
    let gap = |g| {
        let s = mean_of(&rep.aggregates, 16, g, Algorithm::Sca);
        let a = mean_of(&rep.aggregates, 16, g, Algorithm::SdrAo);
        (s.mean_power_dbm, a.mean_power_dbm, s.n_ok)
    };
    let (s10, a10, n10) = gap(10.0);
    let (s20, a20, n20) = gap(20.0);
    let (g10, g20) = (a10 - s10, a20 - s20);
    outcome(
        s10 <= a10 && g20 > g10,
        format!(
            "10 dB: SCA {s10:.2} dBm vs AO {a10:.2} dBm (gap {g10:.2}, {n10} paired); 20 dB: SCA {s20:.2} vs AO {a20:.2} (gap {g20:.2}, {n20} paired)"
        ),
    )
}

fn loglog_slope(ns: &[usize], t: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn scaling() -> Outcome {
    let ns = vec![16, 25, 36, 49, 64];
    let cfg = ExperimentConfig {
        k: 6,
        n_t: 6,
        n_s: ns.clone(),
        gamma_db: vec![10.0],
        n_realizations: 3,
        master_seed: 4,
        workers: 1,
        ..Default::default()
    };
    let rep = run_experiment(&cfg).unwrap();
    let series = |alg| -> (Vec<f64>, Vec<f64>) {
        ns.iter()
            .map(|&n| {
                let a = mean_of(&rep.aggregates, n, 10.0, alg);
                (a.mean_power_dbm, a.mean_time_s)
            })
            .unzip()
    };
    let (ps, ts) = series(Algorithm::Sca);
    let (pa, ta) = series(Algorithm::SdrAo);
    let decreasing = |p: &[f64]| p.windows(2).all(|w| w[1] < w[0]);
    let (ss, sa) = (loglog_slope(&ns, &ts), loglog_slope(&ns, &ta));
    let last = ns.len() - 1;
    outcome(
        decreasing(&ps) && decreasing(&pa) && ts[last] < ta[last] && sa > ss,
        format!(
            "SCA dBm {ps:.2?}, AO dBm {pa:.2?}; time at 64: SCA {:.2}s AO {:.2}s; slopes SCA {ss:.2} AO {sa:.2}",
            ts[last], ta[last]
        ),
    )
}

fn interior(cone: &Cone, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match *cone {
        Cone::NonNeg(d) => (0..d).map(|_| rng.random_range(0.1..2.0)).collect(),
        Cone::Soc(d) => {
            let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            v[0] = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt() + rng.random_range(0.1..1.0);
            v
        }
        Cone::Psd(d) => {
            // diagonally dominant, so strictly inside
            let mut v = vec![0.0; d * (d + 1) / 2];
            let mut idx = 0;
            for j in 0..d {
                for i in j..d {
                    v[idx] = if i == j {
                        d as f64 + rng.random_range(0.1..1.0)
                    } else {
                        rng.random_range(-0.7..0.7)
                    };
                    idx += 1;
                }
            }
            v
        }
        _ => unreachable!("only generated cones"),
    }
}

fn random_feasible(cones: Vec<Cone>, n: usize, rng: &mut ChaCha8Rng) -> ConicProgram {
    let m: usize = cones.iter().map(Cone::dim).sum();
    let mut trip = Vec::new();
    for r in 0..m {
        for c in 0..n {
            if rng.random_bool(0.6) {
                trip.push((r, c, rng.random_range(-1.0..1.0)));
            }
        }
    }
    let a = CscMatrix::from_triplets(m, n, &trip).unwrap();
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut s0 = Vec::new();
    let mut y0 = Vec::new();
    for cone in &cones {
        s0.extend(interior(cone, rng));
        y0.extend(interior(cone, rng));
    }
    let mut b = s0;
    a.mul_add(1.0, &x0, &mut b);
    let mut c = vec![0.0; n];
    a.tr_mul_add(-1.0, &y0, &mut c);
    ConicProgram {
        c,
        offset: 0.0,
        a,
        b,
        cones,
        var_names: Vec::new(),
    }
}

fn conic_correctness() -> Outcome {
    let settings = Settings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut socp_fail = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..9);
        let mut cones = vec![Cone::NonNeg(rng.random_range(1..4))];
        for _ in 0..rng.random_range(1..4) {
            cones.push(Cone::Soc(rng.random_range(2..6)));
        }
        let prog = random_feasible(cones, n, &mut rng);
        let res = solve(&prog, &settings).unwrap();
        socp_fail += usize::from(!(res.status == Status::Optimal && verify_certificate(&prog, &res)));
    }
    let mut sdp_fail = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..8);
        let mut cones = vec![Cone::Psd(rng.random_range(2..5))];
        if rng.random_bool(0.5) {
            cones.push(Cone::NonNeg(2));
        }
        let prog = random_feasible(cones, n, &mut rng);
        let res = solve(&prog, &settings).unwrap();
        sdp_fail += usize::from(!(res.status == Status::Optimal && verify_certificate(&prog, &res)));
    }
    let mut b = ProgramBuilder::new(1);
    b.set_objective(vec![1.0], 0.0);
    b.push(
        Cone::Soc(3),
        vec![AffineExpr::var(0), AffineExpr::constant(3.0), AffineExpr::constant(4.0)],
    )
    .unwrap();
    let norm = solve(&b.build().unwrap(), &settings).unwrap();
    let t_err = (norm.x[0] - 5.0).abs();
    outcome(
        socp_fail == 0 && sdp_fail == 0 && norm.status == Status::Optimal && t_err <= 1e-7,
        format!("SOCP failures {socp_fail}/100, SDP failures {sdp_fail}/20, |t - 5| = {t_err:.1e}"),
    )
}

fn complexity() -> Outcome {
    let at_one = complexity_estimate(Method::Socp, 1, 1, 1);
    let want = 360.0 * 5f64.sqrt();
    let rel = (at_one - want).abs() / want;
    let big = 1usize << 11;
    let target = 2f64.powf(3.5);
    let ratio = complexity_estimate(Method::Socp, 1, 1, big) / complexity_estimate(Method::Socp, 1, 1, big / 2);
    let ok_ratio = (ratio - target).abs() <= 0.1 * target;
    outcome(
        rel <= 1e-9 && ok_ratio,
        format!("value at (1,1,1) relative error {rel:.1e}; doubling ratio at K = N_t = 1 {ratio:.3} vs {target:.3}"),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        all &= o.pass;
        println!(
            "{} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    };
    report("surrogate soundness", &mut surrogate_soundness);
    report("structural exactness", &mut structural_exactness);
    let runs = descent_runs();
    report("descent", &mut || descent(&runs));
    report("unit-modulus binding", &mut || unit_modulus(&runs));
    report("oracle equivalence", &mut oracle_equivalence);
    report("benchmark dominance", &mut dominance);
    report("scaling trends", &mut scaling);
    report("conic solver correctness", &mut conic_correctness);
    report("complexity estimator", &mut complexity);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
