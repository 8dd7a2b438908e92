//! Seeded experiments: convergence traces and success-rate sweeps.
//!
//! Trial `t` of an experiment draws everything from `mix(base_seed, t)`: the
//! unit-norm signal from one derived stream and the ensemble from another.
//! The same trial seed is reused at every grid point, so a sweep compares
//! parameter values on common random numbers. Trials run on a rayon pool
//! capped by `AFFINEPR_THREADS`; results are collected in trial order.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{measure, MeasurementEnsemble, MeasurementModel, ModelKind, ModelRegistry, ObservationSet};
use crate::error::{Error, Result};
use crate::newton::{self, contraction_beta, IterationRecord, Mode, SolverConfig, StopReason};
use crate::oracle::random_unit_signal;
use crate::rng::{mix, rng_from_seed, stream};
use crate::{SignalVector, C64};

pub use output::{format_number, write_results, write_trace_csv, OutputFormat, CONVERGENCE_HEADER, SWEEP_HEADER};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "AFFINEPR_THREADS";

/// Window of errors used when fitting the convergence order.
pub const ORDER_FIT_WINDOW: (f64, f64) = (1e-8, 1e-1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    SuccessRate,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(Self::Convergence),
            "success-rate" | "success_rate" => Ok(Self::SuccessRate),
            other => Err(Error::invalid(format!("unknown experiment kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub model: ModelKind,
    pub n: usize,
    /// `m/n` ratios for Gaussian, pattern counts `L` for CDP.
    pub grid: Vec<f64>,
    #[serde(default = "default_b_magnitude")]
    pub b_magnitude: f64,
    #[serde(default)]
    pub b_phase: f64,
    pub trials: usize,
    pub max_iters: usize,
    /// A trial succeeds when the relative error drops below this.
    pub success_threshold: f64,
    /// Solver stopping tolerance; defaults to the success threshold for
    /// sweeps and to `1e-14` for convergence traces.
    #[serde(default)]
    pub stop_tol: Option<f64>,
    pub base_seed: u64,
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Block count for resampled runs.
    #[serde(default)]
    pub blocks: Option<usize>,
    #[serde(default)]
    pub track_lambda_min: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "OutputFormat::all")]
    pub formats: Vec<OutputFormat>,
}

fn default_b_magnitude() -> f64 {
    52.0
}

impl ExperimentSpec {
    /// Convergence trace preset: `n = 128`, `m = 4n` or `L = 6`, `|b| = 52`.
    pub fn convergence(model: ModelKind) -> Self {
        Self {
            kind: ExperimentKind::Convergence,
            model,
            n: 128,
            grid: vec![match model {
                ModelKind::Gaussian => 4.0,
                ModelKind::Cdp => 6.0,
            }],
            b_magnitude: 52.0,
            b_phase: 0.0,
            trials: 1,
            max_iters: 10,
            success_threshold: 1e-10,
            stop_tol: None,
            base_seed: 1,
            mode: None,
            blocks: None,
            track_lambda_min: false,
            out_dir: None,
            formats: OutputFormat::all(),
        }
    }

    /// Success-rate preset: `m/n` in `[1, 5]` step `0.1`, or `L` in `3..=10`;
    /// 100 trials, 15 iterations, threshold `1e-5`.
    pub fn success_rate(model: ModelKind) -> Self {
        let grid = match model {
            ModelKind::Gaussian => grid_range(1.0, 5.0, 0.1),
            ModelKind::Cdp => (3..=10).map(f64::from).collect(),
        };
        Self {
            kind: ExperimentKind::SuccessRate,
            grid,
            trials: 100,
            max_iters: 15,
            success_threshold: 1e-5,
            ..Self::convergence(model)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("grid must be nonempty"));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::invalid("success threshold must be positive"));
        }
        if self.kind == ExperimentKind::Convergence && self.grid.len() != 1 {
            return Err(Error::invalid(
                "a convergence experiment takes exactly one grid point",
            ));
        }
        let registry = ModelRegistry::builtin();
        let model = registry.for_kind(self.model)?;
        for &p in &self.grid {
            model.size_for(self.n, p)?;
        }
        self.solver_config(0).validate()
    }

    pub fn stop_tol(&self) -> f64 {
        self.stop_tol.unwrap_or(match self.kind {
            ExperimentKind::Convergence => 1e-14,
            ExperimentKind::SuccessRate => self.success_threshold,
        })
    }

    pub fn offset(&self) -> C64 {
        C64::from_polar(self.b_magnitude, self.b_phase)
    }

    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            mode: self.mode.unwrap_or(Mode::FullBatch),
            max_iters: self.max_iters,
            blocks: self.blocks.unwrap_or(1),
            tol: self.stop_tol(),
            b_magnitude: self.b_magnitude,
            b_phase: self.b_phase,
            seed,
            track_lambda_min: self.track_lambda_min,
            ..SolverConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        spec.validate()?;
        Ok(spec)
    }
}

/// `start, start + step, ...` up to `stop` inclusive, computed as
/// `start + i * step` and rounded to 12 decimals to avoid drift.
pub fn grid_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

/// Worker count from `AFFINEPR_THREADS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// Inputs of one trial: signal, ensemble with offset, observations.
pub struct TrialInputs {
    pub x: SignalVector,
    pub ensemble: MeasurementEnsemble,
    pub observations: ObservationSet,
}

pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    mix(base_seed, trial as u64)
}

pub fn trial_inputs(
    model: &dyn MeasurementModel,
    n: usize,
    size: usize,
    b: C64,
    seed: u64,
) -> Result<TrialInputs> {
    let x = random_unit_signal(n, &mut rng_from_seed(mix(seed, stream::SIGNAL)));
    let ensemble = model.generate(n, size, mix(seed, stream::ENSEMBLE))?.with_offset(b);
    let observations = measure(&ensemble, &x)?;
    Ok(TrialInputs {
        x,
        ensemble,
        observations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub param: f64,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub stop: Option<StopReason>,
    pub breakdown: Option<String>,
    /// `||z_T - x||` with no phase alignment.
    pub final_abs_err: Option<f64>,
    pub wall_secs: f64,
}

impl TrialOutcome {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.rel_err).collect()
    }

    pub fn error_pairs(&self) -> Vec<(f64, f64)> {
        self.errors().windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// First iteration whose relative error is below `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rel_err.is_some_and(|e| e < threshold))
            .map(|r| r.iter)
    }
}

fn run_trial(spec: &ExperimentSpec, model: &dyn MeasurementModel, param: f64, trial: usize) -> Result<TrialOutcome> {
    let seed = trial_seed(spec.base_seed, trial);
    let started = Instant::now();
    let size = model.size_for(spec.n, param)?;
    let inputs = trial_inputs(model, spec.n, size, spec.offset(), seed)?;
    let trace = newton::run(
        &inputs.ensemble,
        &inputs.observations,
        &spec.solver_config(seed),
        Some(&inputs.x),
    )?;
    Ok(TrialOutcome {
        trial,
        param,
        seed,
        final_abs_err: Some((&trace.z - &inputs.x).norm()),
        records: trace.records,
        stop: Some(trace.stop),
        breakdown: trace.breakdown,
        wall_secs: started.elapsed().as_secs_f64(),
    })
}

/// Runs every trial of `spec` at one grid value, in trial order.
pub fn run_trials(spec: &ExperimentSpec, param: f64) -> Result<Vec<TrialOutcome>> {
    let registry = ModelRegistry::builtin();
    let model = registry.for_kind(spec.model)?;
    let pool = pool()?;
    pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, model, param, t))
            .collect::<Result<Vec<_>>>()
    })
}

/// Least-squares slope of `ln e_{k+1}` against `ln e_k` over pairs with
/// `e_k` inside `window`. `None` with fewer than two usable pairs.
pub fn fit_convergence_order(pairs: &[(f64, f64)], window: (f64, f64)) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(a, b)| *a >= window.0 && *a <= window.1 && *b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub trials: usize,
    /// Trials whose error fell below the success threshold within `max_iters`.
    pub reached: usize,
    pub breakdowns: usize,
    /// Pooled convergence-order fit over [`ORDER_FIT_WINDOW`].
    pub fitted_order: Option<f64>,
    /// Largest `e_{k+1} / e_k^2` over pairs in the fit window.
    pub max_contraction: Option<f64>,
    /// `26 (1 + sqrt(delta)) / |b|^2` with `delta = 1` (start at `z_0 = 0`).
    pub beta_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub spec: ExperimentSpec,
    pub summary: ConvergenceSummary,
    pub traces: Vec<TrialOutcome>,
}

pub fn summarize_convergence(spec: &ExperimentSpec, traces: &[TrialOutcome]) -> ConvergenceSummary {
    let pairs: Vec<(f64, f64)> = traces.iter().flat_map(|t| t.error_pairs()).collect();
    let in_window = |e: f64| e >= ORDER_FIT_WINDOW.0 && e <= ORDER_FIT_WINDOW.1;
    let max_contraction = pairs
        .iter()
        .filter(|(a, _)| in_window(*a))
        .map(|(a, b)| b / (a * a))
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |m| m.max(r))));
    ConvergenceSummary {
        trials: traces.len(),
        reached: traces
            .iter()
            .filter(|t| t.first_below(spec.success_threshold).is_some_and(|k| k <= spec.max_iters))
            .count(),
        breakdowns: traces.iter().filter(|t| t.breakdown.is_some()).count(),
        fitted_order: fit_convergence_order(&pairs, ORDER_FIT_WINDOW),
        max_contraction,
        beta_bound: contraction_beta(1.0, spec.b_magnitude),
    }
}

pub fn convergence_experiment(spec: &ExperimentSpec) -> Result<ConvergenceResult> {
    if spec.kind != ExperimentKind::Convergence {
        return Err(Error::invalid("spec kind is not `convergence`"));
    }
    spec.validate()?;
    let traces = if spec.max_iters == 0 {
        Vec::new()
    } else {
        run_trials(spec, spec.grid[0])?
    };
    Ok(ConvergenceResult {
        summary: summarize_convergence(spec, &traces),
        spec: spec.clone(),
        traces,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    /// Rows `m` (Gaussian) or patterns `L` (CDP).
    pub size: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// Mean iterations to success over successful trials.
    pub mean_iters: Option<f64>,
    pub mean_wall_secs: f64,
    /// Normal-approximation binomial 95% half-width.
    pub ci95_half_width: f64,
    pub breakdowns: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    pub points: Vec<SweepPoint>,
}

/// `1.96 sqrt(p (1 - p) / trials)`.
pub fn binomial_half_width(rate: f64, trials: usize) -> f64 {
    1.96 * (rate * (1.0 - rate) / trials as f64).sqrt()
}

pub fn summarize_point(spec: &ExperimentSpec, param: f64, size: usize, outcomes: &[TrialOutcome]) -> SweepPoint {
    let iters: Vec<usize> = outcomes
        .iter()
        .filter_map(|t| t.first_below(spec.success_threshold))
        .filter(|&k| k <= spec.max_iters)
        .collect();
    let trials = outcomes.len();
    let successes = iters.len();
    let rate = if trials > 0 { successes as f64 / trials as f64 } else { 0.0 };
    SweepPoint {
        param,
        size,
        trials,
        successes,
        rate,
        mean_iters: (successes > 0).then(|| iters.iter().sum::<usize>() as f64 / successes as f64),
        mean_wall_secs: if trials > 0 {
            outcomes.iter().map(|t| t.wall_secs).sum::<f64>() / trials as f64
        } else {
            0.0
        },
        ci95_half_width: if trials > 0 { binomial_half_width(rate, trials) } else { 0.0 },
        breakdowns: outcomes.iter().filter(|t| t.breakdown.is_some()).count(),
    }
}

pub fn success_rate_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    if spec.kind != ExperimentKind::SuccessRate {
        return Err(Error::invalid("spec kind is not `success_rate`"));
    }
    spec.validate()?;
    let registry = ModelRegistry::builtin();
    let model = registry.for_kind(spec.model)?;
    let points = spec
        .grid
        .iter()
        .map(|&param| {
            let size = model.size_for(spec.n, param)?;
            let outcomes = run_trials(spec, param)?;
            Ok(summarize_point(spec, param, size, &outcomes))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        spec: spec.clone(),
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExperimentResult {
    Convergence(ConvergenceResult),
    SuccessRate(SweepResult),
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    match spec.kind {
        ExperimentKind::Convergence => convergence_experiment(spec).map(ExperimentResult::Convergence),
        ExperimentKind::SuccessRate => success_rate_experiment(spec).map(ExperimentResult::SuccessRate),
    }
}
