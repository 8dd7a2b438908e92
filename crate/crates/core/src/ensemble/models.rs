use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use super::{MeasurementEnsemble, ModelKind};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::C64;

/// Largest modulus an octanary pattern entry can take (`sqrt(3)`).
pub const OCTANARY_MAX_MODULUS: f64 = 1.732_050_807_568_877_2;

/// A family of random measurement ensembles, selectable by name.
pub trait MeasurementModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> ModelKind;

    /// Size argument for [`generate`](Self::generate) given a sweep parameter
    /// (`m/n` for Gaussian, the pattern count `L` for CDP).
    fn size_for(&self, n: usize, param: f64) -> Result<usize>;

    /// Number of rows an ensemble of this size has.
    fn rows_for(&self, n: usize, size: usize) -> usize;

    fn generate(&self, n: usize, size: usize, seed: u64) -> Result<MeasurementEnsemble>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GaussianModel;

impl MeasurementModel for GaussianModel {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Gaussian
    }

    fn size_for(&self, n: usize, param: f64) -> Result<usize> {
        if !(param.is_finite() && param > 0.0) {
            return Err(Error::invalid(format!("m/n ratio must be positive, got {param}")));
        }
        let m = (n as f64 * param).round() as usize;
        if m == 0 {
            return Err(Error::invalid(format!("m/n = {param} gives zero rows at n = {n}")));
        }
        Ok(m)
    }

    fn rows_for(&self, _n: usize, size: usize) -> usize {
        size
    }

    fn generate(&self, n: usize, size: usize, seed: u64) -> Result<MeasurementEnsemble> {
        gen_gaussian(n, size, seed)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CdpModel;

impl MeasurementModel for CdpModel {
    fn name(&self) -> &'static str {
        "cdp"
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Cdp
    }

    fn size_for(&self, _n: usize, param: f64) -> Result<usize> {
        if !(param.is_finite() && param >= 1.0 && param.fract() == 0.0) {
            return Err(Error::invalid(format!(
                "CDP pattern count must be a positive integer, got {param}"
            )));
        }
        Ok(param as usize)
    }

    fn rows_for(&self, n: usize, size: usize) -> usize {
        n * size
    }

    fn generate(&self, n: usize, size: usize, seed: u64) -> Result<MeasurementEnsemble> {
        gen_cdp(n, size, seed)
    }
}

/// Name-keyed collection of measurement models.
pub struct ModelRegistry {
    models: Vec<Box<dyn MeasurementModel>>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self { models: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(GaussianModel));
        r.register(Box::new(CdpModel));
        r
    }

    /// Adds a model, replacing any existing one with the same name.
    pub fn register(&mut self, model: Box<dyn MeasurementModel>) {
        self.models.retain(|m| m.name() != model.name());
        self.models.push(model);
    }

    pub fn get(&self, name: &str) -> Result<&dyn MeasurementModel> {
        self.models
            .iter()
            .find(|m| m.name().eq_ignore_ascii_case(name))
            .map(|m| m.as_ref())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown measurement model `{name}` (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn for_kind(&self, kind: ModelKind) -> Result<&dyn MeasurementModel> {
        self.get(kind.as_str())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.models.iter().map(|m| m.name()).collect()
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Gaussian ensemble: every entry of `A` is `u + iv` with `u, v ~ N(0, 1/2)`
/// independent, drawn row-major from the seeded stream.
pub fn gen_gaussian(n: usize, m: usize, seed: u64) -> Result<MeasurementEnsemble> {
    if n == 0 || m == 0 {
        return Err(Error::invalid(format!(
            "gaussian ensemble needs n >= 1 and m >= 1, got n = {n}, m = {m}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let rows = (0..m * n)
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            C64::new(u * FRAC_1_SQRT_2, v * FRAC_1_SQRT_2)
        })
        .collect();
    MeasurementEnsemble::from_rows(ModelKind::Gaussian, n, rows, 0, seed)
}

/// One draw of the octanary law `d = b1 * b2`: `b1` uniform on `{1, -1, i, -i}`,
/// `b2 = sqrt(2)/2` with probability 4/5 and `sqrt(3)` with probability 1/5.
pub fn sample_octanary<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let b1 = match rng.random_range(0..4u8) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(-1.0, 0.0),
        2 => C64::new(0.0, 1.0),
        _ => C64::new(0.0, -1.0),
    };
    let b2 = if rng.random_bool(0.8) {
        FRAC_1_SQRT_2
    } else {
        OCTANARY_MAX_MODULUS
    };
    b1 * b2
}

/// Coded diffraction ensemble with `L` octanary patterns of length `n`.
pub fn gen_cdp(n: usize, patterns_count: usize, seed: u64) -> Result<MeasurementEnsemble> {
    if n == 0 || patterns_count == 0 {
        return Err(Error::invalid(format!(
            "CDP ensemble needs n >= 1 and L >= 1, got n = {n}, L = {patterns_count}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let patterns = (0..patterns_count)
        .map(|_| (0..n).map(|_| sample_octanary(&mut rng)).collect())
        .collect();
    gen_cdp_with_patterns(n, patterns, seed)
}

/// CDP ensemble from explicit patterns `d_l`, each of length `n`.
///
/// Row `j` (0-based) is `a_(l,k)* = f_k* D_l*` with `(l, k) = cdp_row_index(j, n)`;
/// its entry `t` is `conj(d_l[t]) * w^(-t k)`, `w = exp(2 pi i / n)`. The DFT
/// is unnormalized, so each row of the bare DFT has unit-modulus entries.
pub fn gen_cdp_with_patterns(
    n: usize,
    patterns: Vec<Vec<C64>>,
    seed: u64,
) -> Result<MeasurementEnsemble> {
    if n == 0 || patterns.is_empty() {
        return Err(Error::invalid("CDP ensemble needs n >= 1 and at least one pattern"));
    }
    if let Some(bad) = patterns.iter().position(|p| p.len() != n) {
        return Err(Error::invalid(format!(
            "pattern {bad} has length {}, expected {n}",
            patterns[bad].len()
        )));
    }
    // Twiddles indexed by (t*k) mod n keep the phases exact to one rounding.
    let twiddle: Vec<C64> = (0..n)
        .map(|r| C64::from_polar(1.0, -2.0 * PI * r as f64 / n as f64))
        .collect();
    let l_count = patterns.len();
    let mut rows = Vec::with_capacity(l_count * n * n);
    for pattern in &patterns {
        for k in 0..n {
            for (t, d) in pattern.iter().enumerate() {
                rows.push(d.conj() * twiddle[(t * k) % n]);
            }
        }
    }
    Ok(MeasurementEnsemble::from_rows(ModelKind::Cdp, n, rows, l_count, seed)?
        .attach_patterns(patterns))
}

/// Maps a 0-based row index to its 0-based `(pattern, frequency)` pair.
///
/// The 1-based convention `l = ceil(j/n)`, `k = (j mod n) - 1` becomes
/// `(j / n, j % n)` once both `j` and `l` start at zero.
pub fn cdp_row_index(j: usize, n: usize) -> (usize, usize) {
    (j / n, j % n)
}
