//! Newton iteration in Wirtinger coordinates.
//!
//! Each step solves `H(z_k) w = grad f(z_k)` in `C^{2n}` and updates
//! `z_{k+1} = z_k - dz`, where `dz` is the conjugate-pair projection of `w`.
//! A run starts from `z_0 = 0`; the [`IterationSchedule`] decides which rows
//! each step sees.

mod schedule;

use std::borrow::Cow;
use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::{MeasurementEnsemble, ObservationSet};
use crate::error::{Error, Result};
use crate::linalg::{self, Factorization, NEAR_SINGULAR_COND};
use crate::wirtinger::{self, WirtingerGradient, WirtingerHessian};
use crate::{SignalVector, C64};

pub use schedule::{partition_blocks, FullBatch, IterationSchedule, Resampled, ScheduleRegistry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    FullBatch,
    Resampled,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FullBatch => "fullbatch",
            Mode::Resampled => "resampled",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fullbatch" | "full-batch" => Ok(Mode::FullBatch),
            "resampled" => Ok(Mode::Resampled),
            other => Err(Error::invalid(format!("unknown solver mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub mode: Mode,
    pub max_iters: usize,
    /// Block count `T` for [`Mode::Resampled`]; must divide `m`.
    pub blocks: usize,
    /// Stop when the relative error (ground truth known) or
    /// `||grad f|| / |b|^2` drops below this.
    pub tol: f64,
    pub b_magnitude: f64,
    pub b_phase: f64,
    /// Tikhonov shift `mu` used when a Newton system is near-singular.
    pub regularization_floor: f64,
    pub seed: u64,
    /// Record `lambda_min(H(z_k))` each iteration (dense eigensolve).
    pub track_lambda_min: bool,
}

impl Default for SolverConfig {
    /// `|b| = 52` with zero phase, full batch.
    fn default() -> Self {
        Self {
            mode: Mode::FullBatch,
            max_iters: 15,
            blocks: 1,
            tol: 1e-10,
            b_magnitude: 52.0,
            b_phase: 0.0,
            regularization_floor: 1e-6,
            seed: 0,
            track_lambda_min: false,
        }
    }
}

impl SolverConfig {
    /// Smallest offset the global guarantee covers: `|b|^2 = 52`.
    pub fn minimal_offset() -> Self {
        Self {
            b_magnitude: 52f64.sqrt(),
            ..Self::default()
        }
    }

    pub fn offset(&self) -> C64 {
        C64::from_polar(self.b_magnitude, self.b_phase)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.b_magnitude > 0.0 && self.b_magnitude.is_finite()) {
            return Err(Error::invalid(format!(
                "b magnitude must be positive, got {}",
                self.b_magnitude
            )));
        }
        if !(self.regularization_floor >= 0.0) {
            return Err(Error::invalid("regularization floor must be nonnegative"));
        }
        if self.mode == Mode::Resampled && self.blocks == 0 {
            return Err(Error::invalid("resampled mode needs T >= 1"));
        }
        Ok(())
    }
}

/// Solution of one Newton system.
#[derive(Clone, Debug)]
pub struct NewtonSolve {
    pub delta: SignalVector,
    pub factorization: Factorization,
    pub cond_estimate: f64,
    /// A Tikhonov shift was applied.
    pub regularized: bool,
    /// `||w_up - conj(w_low)|| / ||w||` before symmetrization.
    pub symmetrization_residual: f64,
}

/// Solves `H w = g` and returns `dz = (w_up + conj(w_low)) / 2`.
///
/// A near-singular factorization (condition estimate above `1e12`) is retried
/// on `H + mu I`.
pub fn solve_newton_system(
    h: &WirtingerHessian,
    g: &WirtingerGradient,
    regularization_floor: f64,
) -> Result<NewtonSolve> {
    solve_at(h, g, regularization_floor, 0)
}

fn solve_at(
    h: &WirtingerHessian,
    g: &WirtingerGradient,
    mu: f64,
    iteration: usize,
) -> Result<NewtonSolve> {
    if h.n() != g.n() {
        return Err(Error::invalid(format!(
            "Hessian of order {} with gradient of order {}",
            2 * h.n(),
            2 * g.n()
        )));
    }
    let dense = h.assemble();
    let rhs = g.stacked();
    let first = linalg::solve_hermitian(&dense, &rhs);
    let (out, regularized) = match first {
        Some(out) if out.cond_estimate <= NEAR_SINGULAR_COND => (out, false),
        first => {
            let shifted = &dense + DMatrix::<C64>::identity(dense.nrows(), dense.ncols()) * C64::new(mu, 0.0);
            match (linalg::solve_hermitian(&shifted, &rhs), first) {
                (Some(out), _) if mu > 0.0 => (out, true),
                (_, Some(out)) => (out, false),
                (Some(out), None) => (out, true),
                (None, None) => {
                    return Err(Error::SolverBreakdown {
                        iteration,
                        reason: format!(
                            "Newton system of order {} is singular even with mu = {mu:e}",
                            dense.nrows()
                        ),
                    })
                }
            }
        }
    };
    let n = h.n();
    let w = &out.x;
    let up = w.rows(0, n);
    let low = w.rows(n, n);
    let low_conj = low.conjugate();
    let wn = w.norm();
    let symmetrization_residual = if wn > 0.0 {
        (up - &low_conj).norm() / wn
    } else {
        0.0
    };
    let delta = (up + low_conj) * C64::new(0.5, 0.0);
    Ok(NewtonSolve {
        delta,
        factorization: out.factorization,
        cond_estimate: out.cond_estimate,
        regularized,
        symmetrization_residual,
    })
}

/// One Newton update on the given rows.
pub fn newton_step(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    z: &SignalVector,
    regularization_floor: f64,
) -> Result<SignalVector> {
    let g = wirtinger::gradient(ens, obs, z)?;
    let h = wirtinger::hessian(ens, obs, z)?;
    let solve = solve_newton_system(&h, &g, regularization_floor)?;
    Ok(z - solve.delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    GradientTolerance,
    IterationCap,
    Breakdown,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StopReason::Converged => "relative error below tolerance",
            StopReason::GradientTolerance => "gradient norm below tolerance",
            StopReason::IterationCap => "iteration cap reached",
            StopReason::Breakdown => "solver breakdown",
        };
        f.write_str(s)
    }
}

/// State at the start of iteration `iter` (that is, at `z_iter`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `||z_k - x|| / ||x||`; absolute error when `x = 0`.
    pub rel_err: Option<f64>,
    /// Objective on all rows.
    pub f: f64,
    /// `||grad f||` over all rows, as a `2n` vector.
    pub grad_norm: f64,
    pub lambda_min: Option<f64>,
    /// Details of the step taken from this iterate, if any.
    pub step: Option<StepInfo>,
    /// Seconds since the run started.
    pub elapsed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub cholesky: bool,
    pub cond_estimate: f64,
    pub regularized: bool,
    pub symmetrization_residual: f64,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub z: SignalVector,
    pub stop: StopReason,
    pub breakdown: Option<String>,
}

impl RunTrace {
    /// Number of Newton steps taken.
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_rel_err(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.rel_err)
    }

    /// Errors `e_0, e_1, ...` (ground truth runs only).
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.rel_err).collect()
    }

    /// Consecutive `(e_k, e_{k+1})` pairs.
    pub fn error_pairs(&self) -> Vec<(f64, f64)> {
        let e = self.errors();
        e.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// First iteration index with relative error below `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rel_err.is_some_and(|e| e < threshold))
            .map(|r| r.iter)
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_numbers(&self, other: &Self) -> bool {
        self.z == other.z
            && self.stop == other.stop
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.iter == b.iter
                    && a.rel_err.map(f64::to_bits) == b.rel_err.map(f64::to_bits)
                    && a.f.to_bits() == b.f.to_bits()
                    && a.grad_norm.to_bits() == b.grad_norm.to_bits()
                    && a.lambda_min.map(f64::to_bits) == b.lambda_min.map(f64::to_bits)
                    && a.step == b.step
            })
    }
}

/// Runs Newton from `z_0 = 0` under `config`, using the built-in schedules.
pub fn run(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    config: &SolverConfig,
    truth: Option<&SignalVector>,
) -> Result<RunTrace> {
    let registry = ScheduleRegistry::builtin();
    run_with_schedule(ens, obs, config, truth, registry.for_mode(config.mode)?)
}

pub fn run_with_schedule(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    config: &SolverConfig,
    truth: Option<&SignalVector>,
    schedule: &dyn IterationSchedule,
) -> Result<RunTrace> {
    config.validate()?;
    if obs.len() != ens.m() {
        return Err(Error::invalid(format!(
            "{} observations for an ensemble of {} rows",
            obs.len(),
            ens.m()
        )));
    }
    if let Some(x) = truth {
        if x.len() != ens.n() {
            return Err(Error::invalid("ground truth dimension differs from ensemble n"));
        }
    }
    let plan = schedule.plan(ens.m(), config)?;
    let b_scale = ens
        .offsets()
        .iter()
        .map(|b| b.norm_sqr())
        .fold(0.0, f64::max);
    let grad_tol = config.tol * if b_scale > 0.0 { b_scale } else { 1.0 };
    let truth_norm = truth.map(|x| x.norm());
    let start = Instant::now();

    let mut z = SignalVector::zeros(ens.n());
    let mut records = Vec::with_capacity(plan.len() + 1);
    let mut stop = StopReason::IterationCap;
    let mut breakdown = None;

    for k in 0..=plan.len() {
        let f = wirtinger::eval_f(ens, obs, &z)?;
        let g_full = wirtinger::gradient(ens, obs, &z)?;
        let rel_err = truth.zip(truth_norm).map(|(x, nx)| {
            let d = (&z - x).norm();
            if nx > 0.0 {
                d / nx
            } else {
                d
            }
        });
        let mut record = IterationRecord {
            iter: k,
            rel_err,
            f,
            grad_norm: g_full.norm(),
            lambda_min: None,
            step: None,
            elapsed: 0.0,
        };

        if rel_err.is_some_and(|e| e < config.tol) {
            stop = StopReason::Converged;
        } else if record.grad_norm < grad_tol {
            stop = StopReason::GradientTolerance;
        } else if k == plan.len() {
            stop = StopReason::IterationCap;
        } else {
            let rows = &plan[k];
            let (block_ens, block_obs): (Cow<'_, MeasurementEnsemble>, Cow<'_, ObservationSet>) =
                if rows.start == 0 && rows.end == ens.m() {
                    (Cow::Borrowed(ens), Cow::Borrowed(obs))
                } else {
                    (
                        Cow::Owned(ens.select_rows(rows.clone())?),
                        Cow::Owned(obs.select(rows.clone())),
                    )
                };
            let g = match &block_ens {
                Cow::Borrowed(_) => g_full,
                Cow::Owned(e) => wirtinger::gradient(e, &block_obs, &z)?,
            };
            let h = wirtinger::hessian(&block_ens, &block_obs, &z)?;
            if config.track_lambda_min {
                record.lambda_min = Some(linalg::lambda_min(&h.assemble()));
            }
            match solve_at(&h, &g, config.regularization_floor, k) {
                Ok(step) => {
                    record.step = Some(StepInfo {
                        cholesky: step.factorization == Factorization::Cholesky,
                        cond_estimate: step.cond_estimate,
                        regularized: step.regularized,
                        symmetrization_residual: step.symmetrization_residual,
                    });
                    z -= &step.delta;
                }
                Err(e) => {
                    stop = StopReason::Breakdown;
                    breakdown = Some(e.to_string());
                }
            }
        }
        record.elapsed = start.elapsed().as_secs_f64();
        let done = record.step.is_none();
        records.push(record);
        if done {
            break;
        }
    }

    Ok(RunTrace {
        records,
        z,
        stop,
        breakdown,
    })
}

/// `beta = 26 (1 + sqrt(delta)) / |b|^2`, the quadratic contraction factor
/// for iterates within `sqrt(delta)` of the truth.
pub fn contraction_beta(delta: f64, b_magnitude: f64) -> f64 {
    26.0 * (1.0 + delta.sqrt()) / (b_magnitude * b_magnitude)
}

/// Complex `2n`-vector `(v; conj v)`.
pub fn lift(v: &SignalVector) -> DVector<C64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i] } else { v[i - n].conj() })
}
