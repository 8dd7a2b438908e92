//! Measurement ensembles and the affine intensity map.
//!
//! An ensemble stores the `m x n` matrix `A` whose `j`-th row is `a_j*`, so
//! the forward map is `(A x)_j + b_j`. Rows are kept row-major; the Hessian
//! accumulation walks one row at a time.

mod io;
mod models;

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{SignalVector, C64};

pub use io::{read_ensemble, sidecar_path, write_ensemble, EnsembleHeader};
pub use models::{
    cdp_row_index, gen_cdp, gen_cdp_with_patterns, gen_gaussian, sample_octanary, CdpModel,
    GaussianModel, MeasurementModel, ModelRegistry, OCTANARY_MAX_MODULUS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gaussian,
    Cdp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gaussian => "gaussian",
            ModelKind::Cdp => "cdp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(ModelKind::Gaussian),
            "cdp" => Ok(ModelKind::Cdp),
            other => Err(Error::invalid(format!("unknown measurement model `{other}`"))),
        }
    }
}

/// Modulation patterns of a CDP ensemble, kept alongside the dense rows so
/// the forward map can run through an FFT.
#[derive(Clone)]
struct CdpPlan {
    patterns: Vec<Vec<C64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl CdpPlan {
    fn new(patterns: Vec<Vec<C64>>, n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n);
        Self { patterns, fft }
    }
}

#[derive(Clone)]
pub struct MeasurementEnsemble {
    model: ModelKind,
    n: usize,
    m: usize,
    patterns_count: usize,
    seed: u64,
    rows: Vec<C64>,
    offsets: Vec<C64>,
    cdp: Option<CdpPlan>,
}

impl fmt::Debug for MeasurementEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasurementEnsemble")
            .field("model", &self.model)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("L", &self.patterns_count)
            .field("seed", &self.seed)
            .field("fft_path", &self.cdp.is_some())
            .finish()
    }
}

impl MeasurementEnsemble {
    /// Builds an ensemble from explicit row-major rows (`rows[j*n + k] = conj(a_j[k])`)
    /// with all offsets zero.
    pub fn from_rows(
        model: ModelKind,
        n: usize,
        rows: Vec<C64>,
        patterns_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("signal dimension n must be positive"));
        }
        if rows.is_empty() || !rows.len().is_multiple_of(n) {
            return Err(Error::invalid(format!(
                "row buffer of length {} is not a nonempty multiple of n = {n}",
                rows.len()
            )));
        }
        let m = rows.len() / n;
        if model == ModelKind::Cdp && patterns_count * n != m {
            return Err(Error::invalid(format!(
                "CDP ensemble needs m = n*L, got m = {m}, n = {n}, L = {patterns_count}"
            )));
        }
        Ok(Self {
            model,
            n,
            m,
            patterns_count,
            seed,
            rows,
            offsets: vec![C64::new(0.0, 0.0); m],
            cdp: None,
        })
    }

    pub(crate) fn attach_patterns(mut self, patterns: Vec<Vec<C64>>) -> Self {
        debug_assert_eq!(patterns.len(), self.patterns_count);
        self.cdp = Some(CdpPlan::new(patterns, self.n));
        self
    }

    /// Replicates one complex offset `b` across all rows.
    pub fn with_offset(mut self, b: C64) -> Self {
        self.offsets.iter_mut().for_each(|o| *o = b);
        self
    }

    /// Sets per-row offsets. Accepted by the data model; the solvers and
    /// experiments only exercise the constant-offset case.
    pub fn with_offsets(mut self, offsets: Vec<C64>) -> Result<Self> {
        if offsets.len() != self.m {
            return Err(Error::invalid(format!(
                "expected {} offsets, got {}",
                self.m,
                offsets.len()
            )));
        }
        self.offsets = offsets;
        Ok(self)
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of CDP patterns; 0 for Gaussian ensembles.
    pub fn patterns_count(&self) -> usize {
        self.patterns_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn offsets(&self) -> &[C64] {
        &self.offsets
    }

    /// The common offset when all `b_j` are equal.
    pub fn constant_offset(&self) -> Option<C64> {
        let b0 = self.offsets[0];
        self.offsets.iter().all(|&b| b == b0).then_some(b0)
    }

    /// Row-major buffer of `A`.
    pub fn rows(&self) -> &[C64] {
        &self.rows
    }

    /// The `j`-th row `a_j*`.
    pub fn row(&self, j: usize) -> &[C64] {
        &self.rows[j * self.n..(j + 1) * self.n]
    }

    pub fn patterns(&self) -> Option<&[Vec<C64>]> {
        self.cdp.as_ref().map(|c| c.patterns.as_slice())
    }

    pub fn has_fft_path(&self) -> bool {
        self.cdp.is_some()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<C64> {
        nalgebra::DMatrix::from_row_slice(self.m, self.n, &self.rows)
    }

    fn check_dim(&self, x: &SignalVector) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "signal has dimension {}, ensemble expects {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// `A x` by dense row products, in row order.
    pub fn apply_dense(&self, x: &SignalVector) -> Result<Vec<C64>> {
        self.check_dim(x)?;
        Ok(self
            .rows
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x.iter()).map(|(a, xi)| a * xi).sum())
            .collect())
    }

    /// `A x` for CDP ensembles via one unnormalized forward DFT of
    /// `conj(d_l) . x` per pattern. `None` when no patterns are attached.
    pub fn apply_fft(&self, x: &SignalVector) -> Result<Option<Vec<C64>>> {
        self.check_dim(x)?;
        let Some(plan) = &self.cdp else {
            return Ok(None);
        };
        let mut out = Vec::with_capacity(self.m);
        let mut buf = vec![C64::new(0.0, 0.0); self.n];
        for pattern in &plan.patterns {
            for ((slot, d), xi) in buf.iter_mut().zip(pattern).zip(x.iter()) {
                *slot = d.conj() * xi;
            }
            plan.fft.process(&mut buf);
            out.extend_from_slice(&buf);
        }
        Ok(Some(out))
    }

    /// `A x`, using the FFT path when available.
    pub fn apply(&self, x: &SignalVector) -> Result<Vec<C64>> {
        match self.apply_fft(x)? {
            Some(v) => Ok(v),
            None => self.apply_dense(x),
        }
    }

    /// Affine values `a_j* x + b_j`.
    pub fn affine(&self, x: &SignalVector) -> Result<Vec<C64>> {
        let mut v = self.apply(x)?;
        v.iter_mut().zip(&self.offsets).for_each(|(vj, bj)| *vj += bj);
        Ok(v)
    }

    /// Sub-ensemble made of a contiguous row range. The FFT path is dropped.
    pub fn select_rows(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.m {
            return Err(Error::invalid(format!(
                "row range {range:?} is empty or exceeds m = {}",
                self.m
            )));
        }
        let patterns_count = if self.model == ModelKind::Cdp && range.len().is_multiple_of(self.n) {
            range.len() / self.n
        } else {
            0
        };
        Ok(Self {
            // A partial CDP block is no longer a full pattern set; tag it
            // Gaussian-shaped (generic dense rows) unless whole patterns remain.
            model: if patterns_count > 0 {
                self.model
            } else {
                ModelKind::Gaussian
            },
            n: self.n,
            m: range.len(),
            patterns_count,
            seed: self.seed,
            rows: self.rows[range.start * self.n..range.end * self.n].to_vec(),
            offsets: self.offsets[range.clone()].to_vec(),
            cdp: None,
        })
    }
}

/// Noiseless intensities `y_j = |a_j* x + b_j|^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub y: Vec<f64>,
    pub source_seed: u64,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, range: Range<usize>) -> Self {
        Self {
            y: self.y[range].to_vec(),
            source_seed: self.source_seed,
        }
    }
}

pub fn measure(ensemble: &MeasurementEnsemble, x: &SignalVector) -> Result<ObservationSet> {
    let y = ensemble.affine(x)?.into_iter().map(|w| w.norm_sqr()).collect();
    Ok(ObservationSet {
        y,
        source_seed: ensemble.seed(),
    })
}
