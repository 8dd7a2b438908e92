//! Oracle suites runnable by name (`affinepr check <name>`).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_gradient_fd, check_hessian_fd, eig_bounds, gradient_fd_step, hessian_fd_step,
    mc_expectation_check, random_complex, random_unit_signal, structured_matrix,
};
use crate::ensemble::{gen_gaussian, measure, GaussianModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{mix, rng_from_seed};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckParams {
    /// Signal dimension; `None` uses the suite's default.
    pub n: Option<usize>,
    pub seed: u64,
}

impl Default for CheckParams {
    fn default() -> Self {
        Self { n: None, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub label: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            lines: Vec::new(),
        }
    }

    /// Records `value <= threshold`.
    fn at_most(&mut self, label: impl Into<String>, value: f64, threshold: f64) {
        self.lines.push(CheckLine {
            label: label.into(),
            value,
            threshold,
            passed: value <= threshold,
        });
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(
                f,
                "[{}] {}: {}: {:.3e} (threshold {:.3e})",
                if l.passed { "PASS" } else { "FAIL" },
                self.name,
                l.label,
                l.value,
                l.threshold
            )?;
        }
        Ok(())
    }
}

pub trait OracleCheck: Send + Sync {
    fn name(&self) -> &'static str;

    fn describe(&self) -> &'static str;

    fn run(&self, params: &CheckParams) -> Result<CheckReport>;
}

/// Analytic gradient vs central differences on 20 random instances.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradientCheck;

impl OracleCheck for GradientCheck {
    fn name(&self) -> &'static str {
        "gradient"
    }

    fn describe(&self) -> &'static str {
        "Wirtinger gradient vs central finite differences (20 instances)"
    }

    fn run(&self, params: &CheckParams) -> Result<CheckReport> {
        let n_max = params.n.unwrap_or(8);
        let mut report = CheckReport::new(self.name());
        let mut worst = 0.0f64;
        for t in 0..20u64 {
            let seed = mix(params.seed, t);
            let mut rng = rng_from_seed(seed);
            let n = 1 + (t as usize % n_max);
            let m = 5 * n;
            let b = C64::from_polar(1.0 + 2.0 * rng.random::<f64>(), rng.random::<f64>() * 6.0);
            let ens = gen_gaussian(n, m, mix(seed, 1))?.with_offset(b);
            let x = random_unit_signal(n, &mut rng);
            let z = random_complex(n, &mut rng);
            let obs = measure(&ens, &x)?;
            worst = worst.max(check_gradient_fd(&ens, &obs, &z, gradient_fd_step(&z))?);
        }
        report.at_most("max relative discrepancy", worst, 1e-6);
        Ok(report)
    }
}

/// Quadratic form `v_hat* H v_hat` vs second differences of `f`, plus structure.
#[derive(Clone, Copy, Debug, Default)]
pub struct HessianCheck;

impl OracleCheck for HessianCheck {
    fn name(&self) -> &'static str {
        "hessian"
    }

    fn describe(&self) -> &'static str {
        "Hessian quadratic form vs second differences; Hermitian and block structure"
    }

    fn run(&self, params: &CheckParams) -> Result<CheckReport> {
        let n_max = params.n.unwrap_or(8);
        let mut report = CheckReport::new(self.name());
        let (mut worst_fd, mut worst_herm, mut worst_sym) = (0.0f64, 0.0f64, 0.0f64);
        for t in 0..20u64 {
            let seed = mix(params.seed, t);
            let mut rng = rng_from_seed(seed);
            let n = 1 + (t as usize % n_max);
            let b = C64::from_polar(1.0 + 2.0 * rng.random::<f64>(), rng.random::<f64>() * 6.0);
            let ens = gen_gaussian(n, 5 * n, mix(seed, 1))?.with_offset(b);
            let x = random_unit_signal(n, &mut rng);
            let z = random_complex(n, &mut rng);
            let v = random_unit_signal(n, &mut rng);
            let obs = measure(&ens, &x)?;
            worst_fd = worst_fd.max(check_hessian_fd(&ens, &obs, &z, &v, hessian_fd_step(&z))?);
            let h = crate::wirtinger::hessian(&ens, &obs, &z)?;
            worst_herm = worst_herm.max(linalg::hermitian_defect(&h.assemble()));
            worst_sym = worst_sym.max((h.q() - h.q().transpose()).camax());
        }
        report.at_most("max relative quadratic-form discrepancy", worst_fd, 1e-5);
        report.at_most("max |H - H*|", worst_herm, 1e-12);
        report.at_most("max |Q - Q^T|", worst_sym, 1e-12);
        Ok(report)
    }
}

/// Monte-Carlo `||S - E(S)|| / ||E(S)||` under the Gaussian model.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpectationCheck;

impl OracleCheck for ExpectationCheck {
    fn name(&self) -> &'static str {
        "expectation"
    }

    fn describe(&self) -> &'static str {
        "empirical Hessian vs closed-form expectation (Gaussian, m = 25000 n)"
    }

    fn run(&self, params: &CheckParams) -> Result<CheckReport> {
        let n = params.n.unwrap_or(8);
        let m = 25_000 * n;
        let mut rng = rng_from_seed(mix(params.seed, 0));
        let x = random_unit_signal(n, &mut rng);
        let z = &x + random_complex(n, &mut rng) * C64::new(0.3 / (n as f64).sqrt(), 0.0);
        let b = C64::new(52f64.sqrt(), 0.0);
        let dev = mc_expectation_check(&GaussianModel, &x, &z, b, m, mix(params.seed, 1))?;
        let mut report = CheckReport::new(self.name());
        report.at_most(format!("relative spectral deviation at m = {m}"), dev, 0.02);
        Ok(report)
    }
}

/// Closed-form spectrum of the structured matrix vs a dense eigensolver.
#[derive(Clone, Copy, Debug, Default)]
pub struct EigCheck;

impl OracleCheck for EigCheck {
    fn name(&self) -> &'static str {
        "eig"
    }

    fn describe(&self) -> &'static str {
        "closed-form lambda_min and lambda_max bound vs dense eigensolver (100 triples)"
    }

    fn run(&self, params: &CheckParams) -> Result<CheckReport> {
        let n_max = params.n.unwrap_or(8);
        let mut rng = rng_from_seed(params.seed);
        let (mut worst_min, mut worst_max) = (0.0f64, f64::NEG_INFINITY);
        for t in 0..100usize {
            let n = 1 + t % n_max;
            let u = random_complex(n, &mut rng) * C64::new(2.0 * rng.random::<f64>(), 0.0);
            let v = random_complex(n, &mut rng) * C64::new(2.0 * rng.random::<f64>(), 0.0);
            let beta = u.norm_squared() + 1e-3 + 5.0 * rng.random::<f64>();
            let report = eig_bounds(&u, &v, beta)?;
            let ev = linalg::hermitian_eigenvalues(&structured_matrix(&u, &v, beta));
            worst_min = worst_min.max((ev[0] - report.lambda_min).abs() / (1.0 + beta));
            worst_max = worst_max.max(ev[ev.len() - 1] - report.lambda_max_bound);
        }
        let mut report = CheckReport::new(self.name());
        report.at_most("max |lambda_min closed - dense| / (1 + beta)", worst_min, 1e-10);
        report.at_most("max (lambda_max dense - bound)", worst_max, 1e-10);
        Ok(report)
    }
}

/// Name-keyed collection of oracle checks.
pub struct CheckRegistry {
    checks: Vec<Box<dyn OracleCheck>>,
}

impl CheckRegistry {
    pub fn builtin() -> Self {
        Self {
            checks: vec![
                Box::new(GradientCheck),
                Box::new(HessianCheck),
                Box::new(ExpectationCheck),
                Box::new(EigCheck),
            ],
        }
    }

    pub fn register(&mut self, check: Box<dyn OracleCheck>) {
        self.checks.retain(|c| c.name() != check.name());
        self.checks.push(check);
    }

    pub fn get(&self, name: &str) -> Result<&dyn OracleCheck> {
        self.checks
            .iter()
            .find(|c| c.name().eq_ignore_ascii_case(name))
            .map(|c| c.as_ref())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown check `{name}` (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.checks.iter().map(|c| c.name()).collect()
    }
}

impl Default for CheckRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
