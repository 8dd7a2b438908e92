//! Dense Hermitian solves and spectra.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::C64;

/// Condition-number threshold above which a factorization counts as
/// near-singular.
pub const NEAR_SINGULAR_COND: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factorization {
    Cholesky,
    Lu,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub x: DVector<C64>,
    pub factorization: Factorization,
    /// Estimated 1-norm condition number.
    pub cond_estimate: f64,
}

/// Solves `h x = rhs` for Hermitian `h`: Cholesky first, partial-pivot LU when
/// `h` is not positive definite. `None` if both fail or the result is not
/// finite.
pub fn solve_hermitian(h: &DMatrix<C64>, rhs: &DVector<C64>) -> Option<SolveOutcome> {
    let norm1 = matrix_norm1(h);
    if let Some(chol) = Cholesky::new(h.clone()).filter(has_positive_pivots) {
        let x = chol.solve(rhs);
        if all_finite(&x) {
            let inv_norm = estimate_inverse_norm1(h.nrows(), |v| Some(chol.solve(v)));
            return Some(SolveOutcome {
                x,
                factorization: Factorization::Cholesky,
                cond_estimate: norm1 * inv_norm,
            });
        }
    }
    let lu = h.clone().lu();
    let x = lu.solve(rhs)?;
    if !all_finite(&x) {
        return None;
    }
    // For Hermitian h the adjoint solve is the same solve.
    let inv_norm = estimate_inverse_norm1(h.nrows(), |v| lu.solve(v));
    Some(SolveOutcome {
        x,
        factorization: Factorization::Lu,
        cond_estimate: norm1 * inv_norm,
    })
}

/// Complex Cholesky takes complex square roots, so an indefinite input can
/// still factor; only real positive pivots certify definiteness.
fn has_positive_pivots(chol: &Cholesky<C64, nalgebra::Dyn>) -> bool {
    chol.l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.im.abs() <= 1e-8 * d.re)
}

fn all_finite(v: &DVector<C64>) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Maximum absolute column sum.
pub fn matrix_norm1(h: &DMatrix<C64>) -> f64 {
    h.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager-Higham estimate of `||A^-1||_1` for Hermitian `A`, given a solver
/// for `A x = v`. Returns infinity when a solve fails.
pub fn estimate_inverse_norm1<F>(n: usize, solve: F) -> f64
where
    F: Fn(&DVector<C64>) -> Option<DVector<C64>>,
{
    if n == 0 {
        return 0.0;
    }
    let mut x = DVector::from_element(n, C64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0;
    for iter in 0..5 {
        let Some(y) = solve(&x) else {
            return f64::INFINITY;
        };
        let y_norm: f64 = y.iter().map(|v| v.norm()).sum();
        if !y_norm.is_finite() {
            return f64::INFINITY;
        }
        if iter > 0 && y_norm <= est {
            break;
        }
        est = y_norm;
        let sign = y.map(|v| {
            let r = v.norm();
            if r == 0.0 {
                C64::new(1.0, 0.0)
            } else {
                v / r
            }
        });
        let Some(z) = solve(&sign) else {
            return f64::INFINITY;
        };
        let (j, zj) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let ztx = z.dotc(&x).re;
        if iter > 0 && zj <= ztx {
            break;
        }
        x = DVector::from_element(n, C64::new(0.0, 0.0));
        x[j] = C64::new(1.0, 0.0);
    }
    // Higham's alternating-sign probe guards against the rare underestimate.
    let probe = DVector::from_fn(n, |i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        C64::new(sign * (1.0 + i as f64 / denom), 0.0)
    });
    if let Some(t) = solve(&probe) {
        let alt = 2.0 * t.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
        est = est.max(alt);
    }
    est
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn lambda_min(h: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(h)[0]
}

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
pub fn spectral_norm_hermitian(h: &DMatrix<C64>) -> f64 {
    let ev = hermitian_eigenvalues(h);
    ev[0].abs().max(ev[ev.len() - 1].abs())
}

/// `max |h - h*|` entrywise.
pub fn hermitian_defect(h: &DMatrix<C64>) -> f64 {
    (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random_matrix(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn cholesky_on_pd() {
        let b = random_matrix(12, 1);
        let h = &b * b.adjoint() + DMatrix::identity(12, 12) * C64::new(0.5, 0.0);
        let rhs = DVector::from_fn(12, |i, _| C64::new(i as f64, 1.0));
        let out = solve_hermitian(&h, &rhs).unwrap();
        assert_eq!(out.factorization, Factorization::Cholesky);
        assert!((&h * &out.x - &rhs).norm() / rhs.norm() < 1e-12);
        assert!(out.cond_estimate.is_finite() && out.cond_estimate >= 1.0);
    }

    #[test]
    fn lu_fallback_on_indefinite() {
        let b = random_matrix(10, 2);
        let mut h = (&b + b.adjoint()) * C64::new(0.5, 0.0);
        h[(0, 0)] -= C64::new(5.0, 0.0);
        let rhs = DVector::from_element(10, C64::new(1.0, -1.0));
        let out = solve_hermitian(&h, &rhs).unwrap();
        assert_eq!(out.factorization, Factorization::Lu);
        assert!((&h * &out.x - &rhs).norm() / rhs.norm() < 1e-10);
    }

    #[test]
    fn condition_estimate_tracks_exact() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1e-6, 0.0),
            C64::new(1.0, 0.0),
            C64::new(3.0, 0.0),
        ]));
        let out = solve_hermitian(&d, &DVector::from_element(3, C64::new(1.0, 0.0))).unwrap();
        assert!((out.cond_estimate - 3e6).abs() / 3e6 < 1e-9, "{}", out.cond_estimate);
    }

    #[test]
    fn singular_is_flagged() {
        let h = DMatrix::<C64>::zeros(3, 3);
        let rhs = DVector::from_element(3, C64::new(1.0, 0.0));
        assert!(solve_hermitian(&h, &rhs).is_none());
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(4.0, 0.0),
            C64::new(-2.0, 0.0),
            C64::new(1.0, 0.0),
        ]));
        assert_eq!(hermitian_eigenvalues(&d), vec![-2.0, 1.0, 4.0]);
        assert_eq!(spectral_norm_hermitian(&d), 4.0);
        assert_eq!(hermitian_defect(&d), 0.0);
    }
}
