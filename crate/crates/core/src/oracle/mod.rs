//! Reference quantities and independent checkers.
//!
//! Closed forms: the expected Hessian at the solution and at a general
//! iterate, and the spectrum of the structured matrix
//! `[[beta I - u u*, 0], [0, beta I - conj(u) u^T]] + 2 (v; conj v)(v; conj v)*`.
//! Checkers: central finite differences of the objective, a Taylor-remainder
//! ratio test, a Monte-Carlo estimate of `||S - E(S)|| / ||E(S)||`, and an
//! empirical Lipschitz constant of the Hessian along a segment.

pub mod checks;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{measure, MeasurementEnsemble, MeasurementModel, ObservationSet};
use crate::error::{Error, Result};
use crate::linalg;
use crate::newton::lift;
use crate::wirtinger::{self, WirtingerHessian};
use crate::{SignalVector, C64};

pub use checks::{
    CheckLine, CheckParams, CheckRegistry, CheckReport, EigCheck, ExpectationCheck,
    GradientCheck, HessianCheck, OracleCheck,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationForm {
    /// Iterate equal to the signal: `S` built from `|a* x + b|^2`.
    AtSolution,
    /// Iterate `z` independent of the rows, `y` generated from `x`.
    General,
}

#[derive(Clone, Debug)]
pub struct ExpectedHessian {
    pub blocks: WirtingerHessian,
    pub form: ExpectationForm,
    /// Diagonal shift: `||x||^2 + |b|^2` at the solution, `2||z||^2 - ||x||^2 + |b|^2` in general.
    pub beta: f64,
}

impl ExpectedHessian {
    pub fn matrix(&self) -> DMatrix<C64> {
        self.blocks.assemble()
    }
}

fn outer(u: &SignalVector, v: &SignalVector) -> DMatrix<C64> {
    u * v.adjoint()
}

fn outer_t(u: &SignalVector, v: &SignalVector) -> DMatrix<C64> {
    u * v.transpose()
}

/// `[[(||x||^2 + |b|^2) I + x x*, 2 x x^T], [2 conj(x) x*, (||x||^2 + |b|^2) I + conj(x) x^T]]`.
pub fn expected_hessian_at_x(x: &SignalVector, b: C64) -> ExpectedHessian {
    let n = x.len();
    let beta = x.norm_squared() + b.norm_sqr();
    let p = DMatrix::identity(n, n) * C64::new(beta, 0.0) + outer(x, x);
    let q = outer_t(x, x) * C64::new(2.0, 0.0);
    ExpectedHessian {
        blocks: WirtingerHessian::from_blocks(p, q).expect("square blocks"),
        form: ExpectationForm::AtSolution,
        beta,
    }
}

/// `diag(beta I - x x*, beta I - conj(x) x^T) + 2 (z; conj z)(z; conj z)*`
/// with `beta = 2||z||^2 - ||x||^2 + |b|^2`.
pub fn expected_hessian_general(z: &SignalVector, x: &SignalVector, b: C64) -> Result<ExpectedHessian> {
    if z.len() != x.len() {
        return Err(Error::invalid("z and x must have equal dimension"));
    }
    let n = x.len();
    let beta = 2.0 * z.norm_squared() - x.norm_squared() + b.norm_sqr();
    let p = DMatrix::identity(n, n) * C64::new(beta, 0.0) - outer(x, x)
        + outer(z, z) * C64::new(2.0, 0.0);
    let q = outer_t(z, z) * C64::new(2.0, 0.0);
    Ok(ExpectedHessian {
        blocks: WirtingerHessian::from_blocks(p, q)?,
        form: ExpectationForm::General,
        beta,
    })
}

/// Spectrum facts for `E = diag(beta I - u u*, beta I - conj(u) u^T) + 2 s s*`,
/// `s = (v; conj v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigReport {
    pub lambda_min: f64,
    pub lambda_max_bound: f64,
    /// `beta`, `beta - ||u||^2`, and the two roots of the secular equation.
    pub roots: [f64; 4],
}

pub fn eig_bounds(u: &SignalVector, v: &SignalVector, beta: f64) -> Result<EigReport> {
    if u.len() != v.len() {
        return Err(Error::invalid("u and v must have equal dimension"));
    }
    let uu = u.norm_squared();
    let vv = v.norm_squared();
    if beta <= uu {
        return Err(Error::ConditionViolated(format!(
            "need beta > ||u||^2, got beta = {beta}, ||u||^2 = {uu}"
        )));
    }
    let uv = u.dotc(v).norm_sqr();
    let disc = ((4.0 * vv + uu).powi(2) - 16.0 * uv).max(0.0).sqrt();
    let mid = 0.5 * uu - 2.0 * vv;
    Ok(EigReport {
        lambda_min: beta - uu,
        lambda_max_bound: beta + 4.0 * vv,
        roots: [beta, beta - uu, beta - (mid + 0.5 * disc), beta - (mid - 0.5 * disc)],
    })
}

/// The matrix whose spectrum [`eig_bounds`] describes.
pub fn structured_matrix(u: &SignalVector, v: &SignalVector, beta: f64) -> DMatrix<C64> {
    let n = u.len();
    let p = DMatrix::identity(n, n) * C64::new(beta, 0.0) - outer(u, u)
        + outer(v, v) * C64::new(2.0, 0.0);
    let q = outer_t(v, v) * C64::new(2.0, 0.0);
    WirtingerHessian::from_blocks(p, q).expect("square blocks").assemble()
}

/// Central-difference gradient over the `2n` real coordinates, compared with
/// `d f / d Re z_i = 2 Re(g_i)` and `d f / d Im z_i = 2 Im(g_i)`.
///
/// Returns `max |fd - analytic| / max(max |analytic|, 1)`.
pub fn check_gradient_fd(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    z: &SignalVector,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let g = wirtinger::gradient(ens, obs, z)?;
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    let mut probe = z.clone();
    for i in 0..z.len() {
        for (dir, analytic) in [
            (C64::new(h, 0.0), 2.0 * g.upper()[i].re),
            (C64::new(0.0, h), 2.0 * g.upper()[i].im),
        ] {
            probe[i] = z[i] + dir;
            let fp = wirtinger::eval_f(ens, obs, &probe)?;
            probe[i] = z[i] - dir;
            let fm = wirtinger::eval_f(ens, obs, &probe)?;
            probe[i] = z[i];
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - analytic).abs());
            scale = scale.max(analytic.abs());
        }
    }
    Ok(worst / scale)
}

/// Default gradient step: `1e-6 (1 + ||z||)`.
pub fn gradient_fd_step(z: &SignalVector) -> f64 {
    1e-6 * (1.0 + z.norm())
}

/// Default second-difference step: `1e-4 (1 + ||z||)`.
pub fn hessian_fd_step(z: &SignalVector) -> f64 {
    1e-4 * (1.0 + z.norm())
}

/// Relative gap between the second difference of `f` along `t -> z + t v`
/// and the quadratic form `(v; conj v)* H (v; conj v)`.
pub fn check_hessian_fd(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    z: &SignalVector,
    v: &SignalVector,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let hess = wirtinger::hessian(ens, obs, z)?;
    let vh = lift(v);
    let quad = vh.dotc(&hess.mul_vec(&vh)?).re;
    let f0 = wirtinger::eval_f(ens, obs, z)?;
    let fp = wirtinger::eval_f(ens, obs, &(z + v * C64::new(h, 0.0)))?;
    let fm = wirtinger::eval_f(ens, obs, &(z - v * C64::new(h, 0.0)))?;
    let fd = (fp - 2.0 * f0 + fm) / (h * h);
    Ok((fd - quad).abs() / quad.abs().max(f64::MIN_POSITIVE))
}

/// `|f(z + t v) - [f(z) + Re(g* t v_hat) + (t^2/2) v_hat* H v_hat]|` for each `t`.
pub fn taylor_remainders(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    z: &SignalVector,
    v: &SignalVector,
    ts: &[f64],
) -> Result<Vec<f64>> {
    let f0 = wirtinger::eval_f(ens, obs, z)?;
    let g = wirtinger::gradient(ens, obs, z)?.stacked();
    let vh = lift(v);
    let lin = g.dotc(&vh).re;
    let quad = vh.dotc(&wirtinger::hessian(ens, obs, z)?.mul_vec(&vh)?).re;
    ts.iter()
        .map(|&t| {
            let ft = wirtinger::eval_f(ens, obs, &(z + v * C64::new(t, 0.0)))?;
            Ok((ft - (f0 + t * lin + 0.5 * t * t * quad)).abs())
        })
        .collect()
}

/// Draws a fresh ensemble, builds the empirical Hessian at `z` with `y`
/// generated from `x`, and returns `||S - E(S)||_2 / ||E(S)||_2`.
///
/// `size` is the model's size argument: rows `m` for Gaussian, patterns `L` for CDP.
pub fn mc_expectation_check(
    model: &dyn MeasurementModel,
    x: &SignalVector,
    z: &SignalVector,
    b: C64,
    size: usize,
    seed: u64,
) -> Result<f64> {
    let ens = model.generate(x.len(), size, seed)?.with_offset(b);
    let obs = measure(&ens, x)?;
    let s = wirtinger::hessian(&ens, &obs, z)?.assemble();
    let e = expected_hessian_general(z, x, b)?.matrix();
    Ok(linalg::spectral_norm_hermitian(&(&s - &e)) / linalg::spectral_norm_hermitian(&e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// Largest observed `||H(s1) - H(s2)|| / ||s1 - s2||`.
    pub max_ratio: f64,
    /// `delta = ||z - x||^2`.
    pub delta: f64,
    /// `L_f = 13 (1 + sqrt(delta))`.
    pub lf: f64,
    pub samples: usize,
}

/// Samples point pairs on the segment between `z` and `x` and measures the
/// Hessian's Lipschitz ratio in spectral norm.
pub fn lipschitz_estimate<R: Rng + ?Sized>(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    x: &SignalVector,
    z: &SignalVector,
    samples: usize,
    rng: &mut R,
) -> Result<LipschitzReport> {
    let point = |t: f64| x * C64::new(t, 0.0) + z * C64::new(1.0 - t, 0.0);
    let mut max_ratio = 0.0f64;
    for _ in 0..samples {
        let (t1, t2): (f64, f64) = (rng.random(), rng.random());
        let (s1, s2) = (point(t1), point(t2));
        let dist = (&s1 - &s2).norm();
        if dist == 0.0 {
            continue;
        }
        let h1 = wirtinger::hessian(ens, obs, &s1)?.assemble();
        let h2 = wirtinger::hessian(ens, obs, &s2)?.assemble();
        max_ratio = max_ratio.max(linalg::spectral_norm_hermitian(&(h1 - h2)) / dist);
    }
    let delta = (z - x).norm_squared();
    Ok(LipschitzReport {
        max_ratio,
        delta,
        lf: 13.0 * (1.0 + delta.sqrt()),
        samples,
    })
}

/// Complex standard Gaussian vector (`CN(0, I)`) scaled to unit norm.
pub fn random_unit_signal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SignalVector {
    let v = random_complex(n, rng);
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

/// Entries `u + iv`, `u, v ~ N(0, 1/2)`.
pub fn random_complex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SignalVector {
    use rand_distr::StandardNormal;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    SignalVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}
