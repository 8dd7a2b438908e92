//! Newton's method for affine phase retrieval.
//!
//! Recovers a complex signal `x` from intensities `y_j = |a_j* x + b_j|^2`
//! by Newton iterations on the quartic least-squares objective, using
//! Wirtinger (complex) derivatives. The crate is organized as:
//!
//! * [`ensemble`]: Gaussian and coded-diffraction measurement ensembles and
//!   the forward intensity map.
//! * [`wirtinger`]: objective, Wirtinger gradient and Hessian.
//! * [`newton`]: the Newton update, full-batch and resampled drivers.
//! * [`oracle`]: closed-form expectations, eigenvalue formulas, and
//!   finite-difference / Monte-Carlo checkers.
//! * [`lab`]: seeded experiments (convergence traces, success-rate sweeps)
//!   and result writers.
//!
//! Measurement models, iteration schedules and oracle checks are each
//! exposed through a trait with a name-keyed registry so the CLI can select
//! them at runtime.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod lab;
pub mod linalg;
pub mod newton;
pub mod oracle;
pub mod rng;
pub mod wirtinger;

pub use num_complex::Complex64 as C64;

pub use ensemble::{MeasurementEnsemble, ModelKind, ModelRegistry, ObservationSet};
pub use error::{Error, Result};
pub use newton::{run, Mode, RunTrace, SolverConfig};
pub use wirtinger::{WirtingerGradient, WirtingerHessian};

/// Complex n-vector: the ground truth `x` or an iterate `z_k`.
pub type SignalVector = nalgebra::DVector<C64>;
