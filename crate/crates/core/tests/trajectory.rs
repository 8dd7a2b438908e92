use affinepr_core::ensemble::ModelKind;
use affinepr_core::lab::{self, ExperimentSpec};
use affinepr_core::newton::{Mode, StopReason};

#[test]
fn hessian_floor_holds_along_newton_iterates() {
    let spec = ExperimentSpec {
        n: 32,
        // m = ceil(8 n ln n) = 888.
        grid: vec![888.0 / 32.0],
        trials: 3,
        base_seed: 11,
        track_lambda_min: true,
        ..ExperimentSpec::convergence(ModelKind::Gaussian)
    };
    let run = lab::convergence_experiment(&spec).unwrap();
    assert_eq!(run.summary.reached, 3);
    for t in &run.traces {
        assert!(t.records.len() >= 2);
        // The final iterate takes no step, so no Hessian is formed there.
        for r in &t.records[..t.records.len() - 1] {
            let lm = r.lambda_min.expect("tracked");
            assert!(lm >= 52.0 * 52.0 / 4.0, "iteration {}: lambda_min {lm}", r.iter);
        }
    }
}

#[test]
fn resampled_mode_converges_on_fresh_blocks() {
    let spec = ExperimentSpec {
        n: 16,
        grid: vec![24.0],
        trials: 2,
        max_iters: 6,
        base_seed: 3,
        mode: Some(Mode::Resampled),
        blocks: Some(6),
        ..ExperimentSpec::convergence(ModelKind::Gaussian)
    };
    let run = lab::convergence_experiment(&spec).unwrap();
    for t in &run.traces {
        assert_ne!(t.stop, Some(StopReason::Breakdown));
        assert!(t.first_below(1e-10).is_some(), "{:?}", t.errors());
    }
}

#[test]
fn cdp_convergence_trace_is_quadratic() {
    let spec = ExperimentSpec { n: 32, base_seed: 4, ..ExperimentSpec::convergence(ModelKind::Cdp) };
    let run = lab::convergence_experiment(&spec).unwrap();
    assert_eq!(run.summary.reached, 1);
    assert!(run.summary.fitted_order.unwrap() >= 1.8);
    assert!(run.summary.max_contraction.unwrap() <= 10.0 * run.summary.beta_bound);
}
