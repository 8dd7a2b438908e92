//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use affinepr_core::ensemble::{gen_gaussian, measure, GaussianModel, MeasurementEnsemble, ModelKind, ObservationSet};
use affinepr_core::lab::{self, ExperimentSpec, TrialOutcome, ORDER_FIT_WINDOW};
use affinepr_core::newton::{contraction_beta, solve_newton_system};
use affinepr_core::oracle::{self, CheckParams, CheckRegistry};
use affinepr_core::rng::{mix, rng_from_seed};
use affinepr_core::{linalg, wirtinger, SignalVector, C64};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn convergence_runs(model: ModelKind) -> Vec<TrialOutcome> {
    let spec = ExperimentSpec {
        trials: 100,
        base_seed: match model {
            ModelKind::Gaussian => 101,
            ModelKind::Cdp => 202,
        },
        ..ExperimentSpec::convergence(model)
    };
    lab::convergence_experiment(&spec).expect("convergence experiment").traces
}

fn quadratic_convergence(traces: &[TrialOutcome]) -> Outcome {
    let reached = traces
        .iter()
        .filter(|t| t.first_below(1e-10).is_some_and(|k| k <= 10))
        .count();
    let pairs: Vec<(f64, f64)> = traces.iter().flat_map(|t| t.error_pairs()).collect();
    let slope = lab::fit_convergence_order(&pairs, ORDER_FIT_WINDOW);
    let passed = reached >= 95 && slope.is_some_and(|s| s >= 1.8);
    outcome(
        passed,
        format!(
            "{reached}/100 trials below 1e-10 within 10 iterations (need 95); fitted order {} (need >= 1.8)",
            slope.map_or("n/a".into(), |s| format!("{s:.3}"))
        ),
    )
}

fn success_monotone() -> (Outcome, Vec<TrialOutcome>) {
    let spec = ExperimentSpec {
        n: 64,
        grid: lab::grid_range(1.0, 5.0, 0.5),
        trials: 50,
        base_seed: 303,
        ..ExperimentSpec::success_rate(ModelKind::Gaussian)
    };
    let mut all = Vec::new();
    let mut rates = Vec::new();
    for &p in &spec.grid {
        let trials = lab::run_trials(&spec, p).expect("sweep point");
        let size = (p * 64.0).round() as usize;
        rates.push((p, lab::summarize_point(&spec, p, size, &trials).rate));
        all.extend(trials);
    }
    let mut worst_drop = 0.0f64;
    for (i, &(_, r)) in rates.iter().enumerate() {
        for &(_, left) in &rates[..i] {
            worst_drop = worst_drop.max(left - r);
        }
    }
    let full = rates.iter().filter(|(p, _)| *p >= 4.0).all(|(_, r)| *r == 1.0);
    let listed: Vec<String> = rates.iter().map(|(p, r)| format!("{p}:{r:.2}")).collect();
    (
        outcome(
            worst_drop <= 0.15 && full,
            format!("rates [{}]; largest drop {worst_drop:.2} (max 0.15); rate 1 at m/n >= 4: {full}", listed.join(" ")),
        ),
        all,
    )
}

fn contraction(traces: &[TrialOutcome]) -> Outcome {
    let beta = contraction_beta(1.0, 52.0);
    let bound = 10.0 * beta;
    let mut worst = 0.0f64;
    let mut count = 0;
    for (a, b) in traces.iter().flat_map(|t| t.error_pairs()) {
        if a >= ORDER_FIT_WINDOW.0 && a <= ORDER_FIT_WINDOW.1 {
            worst = worst.max(b / (a * a));
            count += 1;
        }
    }
    outcome(
        count > 0 && worst <= bound,
        format!("max e_(k+1)/e_k^2 = {worst:.4e} over {count} steps (bound 10 beta = {bound:.4e})"),
    )
}

fn hessian_floor() -> Outcome {
    let n = 32;
    let m = (8.0 * n as f64 * (n as f64).ln()).ceil() as usize;
    let b = C64::new(52f64.sqrt(), 0.0);
    let mut worst = f64::INFINITY;
    let mut hypotheses = true;
    for s in 0..20u64 {
        let mut rng = rng_from_seed(mix(505, s));
        let x = oracle::random_unit_signal(n, &mut rng);
        let radius: f64 = rng.random();
        let z = &x + oracle::random_unit_signal(n, &mut rng) * C64::new(radius, 0.0);
        hypotheses &= (&z - &x).norm() <= 1.0 && 52.0 >= 4.0 * (x.norm_squared() + z.norm_squared());
        let ens = gen_gaussian(n, m, mix(606, s)).expect("ensemble").with_offset(b);
        let obs = measure(&ens, &x).expect("measure");
        let h = wirtinger::hessian(&ens, &obs, &z).expect("hessian").assemble();
        worst = worst.min(linalg::lambda_min(&h));
    }
    outcome(
        hypotheses && worst >= 13.0,
        format!("m = {m}; min lambda_min over 20 pairs = {worst:.3} (need >= 13)"),
    )
}

fn derivative_checks() -> Outcome {
    let reg = CheckRegistry::builtin();
    let params = CheckParams { n: Some(8), seed: 707 };
    let g = reg.get("gradient").unwrap().run(&params).expect("gradient check");
    let h = reg.get("hessian").unwrap().run(&params).expect("hessian check");
    outcome(
        g.passed() && h.passed(),
        format!(
            "gradient {:.3e} (< 1e-6), Hessian form {:.3e} (< 1e-5)",
            g.lines[0].value, h.lines[0].value
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn expectation_oracle() -> Outcome {
    let b = C64::new(52f64.sqrt(), 0.0);
    let (mut at_m, mut at_4m) = (Vec::new(), Vec::new());
    for s in 0..10u64 {
        let mut rng = rng_from_seed(mix(808, s));
        let x = oracle::random_unit_signal(8, &mut rng);
        let z = oracle::random_unit_signal(8, &mut rng);
        at_m.push(oracle::mc_expectation_check(&GaussianModel, &x, &z, b, 200_000, mix(809, s)).unwrap());
        at_4m.push(oracle::mc_expectation_check(&GaussianModel, &x, &z, b, 800_000, mix(810, s)).unwrap());
    }
    let worst = at_m.iter().copied().fold(0.0, f64::max);
    let (d1, d4) = (median(at_m), median(at_4m));
    let ratio = d4 / d1;
    outcome(
        d1 < 0.02 && (0.35..=0.65).contains(&ratio),
        format!(
            "median deviation {d1:.4} at m = 2e5 (need < 0.02, max of 10 draws {worst:.4}); median ratio at 4m {ratio:.3} (need 0.35..0.65)"
        ),
    )
}

fn eigen_formulas() -> Outcome {
    let report = CheckRegistry::builtin()
        .get("eig")
        .unwrap()
        .run(&CheckParams { n: Some(8), seed: 909 })
        .expect("eig check");
    outcome(
        report.passed(),
        format!(
            "closed-form lambda_min gap {:.3e} (relative to 1 + beta, need <= 1e-10); lambda_max excess {:.3e}",
            report.lines[0].value, report.lines[1].value
        ),
    )
}

fn exactness(groups: &[(&str, &[TrialOutcome], f64)]) -> Outcome {
    let mut worst = 0.0f64;
    let mut successes = 0;
    for (_, traces, threshold) in groups {
        for t in traces.iter().filter(|t| t.first_below(*threshold).is_some()) {
            successes += 1;
            worst = worst.max(t.final_abs_err.unwrap_or(f64::INFINITY));
        }
    }
    outcome(
        successes > 0 && worst < 1e-5,
        format!("max ||z_T - x|| over {successes} successful trials = {worst:.3e} (need < 1e-5)"),
    )
}

fn micro_instance() -> Outcome {
    let ens = MeasurementEnsemble::from_rows(ModelKind::Gaussian, 1, vec![C64::new(1.0, 0.0)], 0, 0)
        .expect("rows")
        .with_offset(C64::new(10.0, 0.0));
    let x = SignalVector::from_element(1, C64::new(1.0, 0.0));
    let obs: ObservationSet = measure(&ens, &x).expect("measure");
    let z0 = SignalVector::zeros(1);
    let f = wirtinger::eval_f(&ens, &obs, &z0).unwrap();
    let g = wirtinger::gradient(&ens, &obs, &z0).unwrap();
    let h = wirtinger::hessian(&ens, &obs, &z0).unwrap();
    let step = solve_newton_system(&h, &g, 0.0).unwrap();
    let z1 = &z0 - &step.delta;
    let errs = [
        (f - 220.5).abs(),
        (g.upper()[0] - C64::new(-210.0, 0.0)).norm(),
        (h.p()[(0, 0)] - C64::new(79.0, 0.0)).norm(),
        (h.q()[(0, 0)] - C64::new(100.0, 0.0)).norm(),
        (z1[0] - C64::new(210.0 / 179.0, 0.0)).norm(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < 1e-12,
        format!("f = {f}, g = {}, P = {}, Q = {}, z1 = {} (max error {worst:.1e})", g.upper()[0].re, h.p()[(0, 0)].re, h.q()[(0, 0)].re, z1[0].re),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let gaussian = convergence_runs(ModelKind::Gaussian);
    let cdp = convergence_runs(ModelKind::Cdp);
    let (sweep_outcome, sweep_trials) = success_monotone();

    let results: Vec<(&str, Outcome)> = vec![
        ("1 quadratic convergence, Gaussian n=128 m=4n", quadratic_convergence(&gaussian)),
        ("2 quadratic convergence, CDP n=128 L=6", quadratic_convergence(&cdp)),
        ("3 success rate vs m/n, n=64", sweep_outcome),
        ("4 contraction constant", contraction(&gaussian)),
        ("5 Hessian floor n=32", hessian_floor()),
        ("6 finite-difference derivatives", derivative_checks()),
        ("7 expectation oracle", expectation_oracle()),
        ("8 eigenvalue formulas", eigen_formulas()),
        (
            "9 exact recovery without phase alignment",
            exactness(&[("gaussian", &gaussian, 1e-10), ("cdp", &cdp, 1e-10), ("sweep", &sweep_trials, 1e-5)]),
        ),
        ("10 micro instance", micro_instance()),
    ];

    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
