//! Objective, Wirtinger gradient and Wirtinger Hessian of
//! `f(z) = (1/2m) sum_j (|a_j* z + b_j|^2 - y_j)^2`.
//!
//! With `w_j = a_j* z + b_j` and `r_j = |w_j|^2 - y_j`:
//!
//! * gradient, upper half: `(1/m) sum_j r_j w_j a_j`; lower half its conjugate;
//! * Hessian blocks: `P = (1/m) sum_j (2|w_j|^2 - y_j) a_j a_j*`,
//!   `Q = (1/m) sum_j w_j^2 a_j a_j^T`, assembled as `[[P, Q], [conj Q, conj P]]`.
//!
//! All sums run sequentially in row order, so results are reproducible bit for bit.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::{MeasurementEnsemble, ObservationSet};
use crate::error::{Error, Result};
use crate::{SignalVector, C64};

/// Gradient in `C^{2n}`: `(df/dz-bar ; conj of it)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WirtingerGradient {
    upper: DVector<C64>,
}

impl WirtingerGradient {
    pub fn from_upper(upper: DVector<C64>) -> Self {
        Self { upper }
    }

    pub fn n(&self) -> usize {
        self.upper.len()
    }

    pub fn upper(&self) -> &DVector<C64> {
        &self.upper
    }

    pub fn lower(&self) -> DVector<C64> {
        self.upper.conjugate()
    }

    /// The full `2n` vector; the lower half is the conjugate of the upper by construction.
    pub fn stacked(&self) -> DVector<C64> {
        let n = self.n();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.upper[i]
            } else {
                self.upper[i - n].conj()
            }
        })
    }

    /// Euclidean norm of the `2n` vector.
    pub fn norm(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.upper.norm()
    }
}

/// Hessian stored by blocks: `P` Hermitian, `Q` complex-symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct WirtingerHessian {
    p: DMatrix<C64>,
    q: DMatrix<C64>,
}

impl WirtingerHessian {
    pub fn from_blocks(p: DMatrix<C64>, q: DMatrix<C64>) -> Result<Self> {
        if !p.is_square() || p.shape() != q.shape() {
            return Err(Error::invalid(format!(
                "Hessian blocks must be square and equal-sized, got {:?} and {:?}",
                p.shape(),
                q.shape()
            )));
        }
        Ok(Self { p, q })
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &DMatrix<C64> {
        &self.p
    }

    pub fn q(&self) -> &DMatrix<C64> {
        &self.q
    }

    /// Dense `2n x 2n` matrix `[[P, Q], [conj Q, conj P]]`.
    pub fn assemble(&self) -> DMatrix<C64> {
        let n = self.n();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.p);
        h.view_mut((0, n), (n, n)).copy_from(&self.q);
        h.view_mut((n, 0), (n, n)).copy_from(&self.q.conjugate());
        h.view_mut((n, n), (n, n)).copy_from(&self.p.conjugate());
        h
    }

    /// Dense product with a `2n` vector without assembling.
    pub fn mul_vec(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        let n = self.n();
        if v.len() != 2 * n {
            return Err(Error::invalid(format!(
                "expected a vector of length {}, got {}",
                2 * n,
                v.len()
            )));
        }
        let v1 = v.rows(0, n);
        let v2 = v.rows(n, n);
        let top = &self.p * v1 + &self.q * v2;
        let bottom = self.q.conjugate() * v1 + self.p.conjugate() * v2;
        Ok(DVector::from_iterator(
            2 * n,
            top.iter().chain(bottom.iter()).copied(),
        ))
    }
}

fn check_inputs(ens: &MeasurementEnsemble, obs: &ObservationSet, z: &SignalVector) -> Result<()> {
    if obs.len() != ens.m() {
        return Err(Error::invalid(format!(
            "{} observations for an ensemble of {} rows",
            obs.len(),
            ens.m()
        )));
    }
    if z.len() != ens.n() {
        return Err(Error::invalid(format!(
            "iterate has dimension {}, ensemble expects {}",
            z.len(),
            ens.n()
        )));
    }
    Ok(())
}

pub fn eval_f(ens: &MeasurementEnsemble, obs: &ObservationSet, z: &SignalVector) -> Result<f64> {
    check_inputs(ens, obs, z)?;
    let w = ens.affine(z)?;
    let sum: f64 = w
        .iter()
        .zip(&obs.y)
        .map(|(wj, yj)| {
            let r = wj.norm_sqr() - yj;
            r * r
        })
        .sum();
    Ok(sum / (2.0 * ens.m() as f64))
}

pub fn gradient(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    z: &SignalVector,
) -> Result<WirtingerGradient> {
    check_inputs(ens, obs, z)?;
    let n = ens.n();
    let w = ens.affine(z)?;
    let mut upper = DVector::zeros(n);
    for (j, (wj, yj)) in w.iter().zip(&obs.y).enumerate() {
        let coef = wj * (wj.norm_sqr() - yj);
        // a_j = conj(row_j)
        for (g, a) in upper.iter_mut().zip(ens.row(j)) {
            *g += coef * a.conj();
        }
    }
    upper /= C64::new(ens.m() as f64, 0.0);
    Ok(WirtingerGradient { upper })
}

pub fn hessian(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    z: &SignalVector,
) -> Result<WirtingerHessian> {
    check_inputs(ens, obs, z)?;
    let n = ens.n();
    let w = ens.affine(z)?;
    // Row-major upper triangles, mirrored at the end.
    let mut p = vec![C64::new(0.0, 0.0); n * n];
    let mut q = vec![C64::new(0.0, 0.0); n * n];
    let mut conj_row = vec![C64::new(0.0, 0.0); n];
    for (j, (wj, yj)) in w.iter().zip(&obs.y).enumerate() {
        let row = ens.row(j);
        let c = 2.0 * wj.norm_sqr() - yj;
        let s = wj * wj;
        for (cr, r) in conj_row.iter_mut().zip(row) {
            *cr = r.conj();
        }
        for i in 0..n {
            let a_i = conj_row[i];
            let cp = a_i * c;
            let sq = a_i * s;
            let p_row = &mut p[i * n + i..(i + 1) * n];
            for (pv, r) in p_row.iter_mut().zip(&row[i..]) {
                *pv += cp * r;
            }
            let q_row = &mut q[i * n + i..(i + 1) * n];
            for (qv, a) in q_row.iter_mut().zip(&conj_row[i..]) {
                *qv += sq * a;
            }
        }
    }
    let scale = 1.0 / ens.m() as f64;
    let p = DMatrix::from_fn(n, n, |i, k| {
        if k >= i {
            p[i * n + k] * scale
        } else {
            p[k * n + i].conj() * scale
        }
    });
    let q = DMatrix::from_fn(n, n, |i, k| {
        if k >= i {
            q[i * n + k] * scale
        } else {
            q[k * n + i] * scale
        }
    });
    Ok(WirtingerHessian { p, q })
}

/// Matrix-free `H(z) v` in `O(mn)`.
pub fn hessian_apply(
    ens: &MeasurementEnsemble,
    obs: &ObservationSet,
    z: &SignalVector,
    v: &DVector<C64>,
) -> Result<DVector<C64>> {
    check_inputs(ens, obs, z)?;
    let n = ens.n();
    if v.len() != 2 * n {
        return Err(Error::invalid(format!(
            "expected a vector of length {}, got {}",
            2 * n,
            v.len()
        )));
    }
    let w = ens.affine(z)?;
    let (v1, v2) = (v.rows(0, n), v.rows(n, n));
    let mut out = DVector::zeros(2 * n);
    for (j, (wj, yj)) in w.iter().zip(&obs.y).enumerate() {
        let row = ens.row(j);
        let c = 2.0 * wj.norm_sqr() - yj;
        let s = wj * wj;
        // a_j* v1 and a_j^T v2
        let av1: C64 = row.iter().zip(v1.iter()).map(|(r, x)| r * x).sum();
        let av2: C64 = row.iter().zip(v2.iter()).map(|(r, x)| r.conj() * x).sum();
        let top = av1 * c + s * av2;
        let bottom = s.conj() * av1 + av2 * c;
        for (k, r) in row.iter().enumerate() {
            out[k] += top * r.conj();
            out[n + k] += bottom * r;
        }
    }
    out /= C64::new(ens.m() as f64, 0.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{gen_gaussian, measure, ModelKind};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// n = 1, m = 1, a = 1, b = 10, x = 1.
    fn micro() -> (MeasurementEnsemble, ObservationSet) {
        let ens = MeasurementEnsemble::from_rows(ModelKind::Gaussian, 1, vec![c(1.0, 0.0)], 0, 0)
            .unwrap()
            .with_offset(c(10.0, 0.0));
        let obs = measure(&ens, &SignalVector::from_element(1, c(1.0, 0.0))).unwrap();
        (ens, obs)
    }

    fn random_instance(n: usize, m: usize, seed: u64) -> (MeasurementEnsemble, ObservationSet, SignalVector, SignalVector) {
        let ens = gen_gaussian(n, m, seed).unwrap().with_offset(c(1.3, -0.4));
        let x = SignalVector::from_fn(n, |i, _| c((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()));
        let z = SignalVector::from_fn(n, |i, _| c(0.2 * i as f64 - 0.5, 0.3));
        let obs = measure(&ens, &x).unwrap();
        (ens, obs, x, z)
    }

    #[test]
    fn micro_instance_values() {
        let (ens, obs) = micro();
        assert_eq!(obs.y, vec![121.0]);
        let z0 = SignalVector::zeros(1);
        assert_eq!(eval_f(&ens, &obs, &z0).unwrap(), 220.5);
        let g = gradient(&ens, &obs, &z0).unwrap();
        assert_eq!(g.upper()[0], c(-210.0, 0.0));
        assert_eq!(g.lower()[0], c(-210.0, 0.0));
        let h = hessian(&ens, &obs, &z0).unwrap();
        assert_eq!(h.p()[(0, 0)], c(79.0, 0.0));
        assert_eq!(h.q()[(0, 0)], c(100.0, 0.0));
    }

    #[test]
    fn vanishes_at_truth() {
        let (ens, obs, x, _) = random_instance(5, 20, 3);
        assert_eq!(eval_f(&ens, &obs, &x).unwrap(), 0.0);
        assert!(gradient(&ens, &obs, &x).unwrap().upper().iter().all(|g| g.norm() == 0.0));
    }

    #[test]
    fn zero_observations_collapse() {
        let ens = gen_gaussian(3, 9, 4).unwrap();
        let obs = ObservationSet { y: vec![0.0; 9], source_seed: 4 };
        let z = SignalVector::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.0), c(0.2, 2.0)]);
        let direct: f64 = ens
            .apply_dense(&z)
            .unwrap()
            .iter()
            .map(|v| v.norm_sqr().powi(2))
            .sum::<f64>()
            / 18.0;
        assert!((eval_f(&ens, &obs, &z).unwrap() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn hessian_structure() {
        let (ens, obs, _, z) = random_instance(6, 40, 5);
        let h = hessian(&ens, &obs, &z).unwrap();
        let full = h.assemble();
        assert!(crate::linalg::hermitian_defect(&full) < 1e-12);
        assert!((h.q() - h.q().transpose()).camax() < 1e-12);
        let n = 6;
        for i in 0..n {
            for k in 0..n {
                assert_eq!(full[(n + i, k)], full[(i, n + k)].conj());
                assert_eq!(full[(n + i, n + k)], full[(i, k)].conj());
            }
        }
    }

    #[test]
    fn hessian_at_solution_without_offset() {
        let ens = gen_gaussian(3, 12, 8).unwrap();
        let x = SignalVector::from_vec(vec![c(0.5, 0.5), c(-1.0, 0.2), c(0.0, 0.7)]);
        let obs = measure(&ens, &x).unwrap();
        let h = hessian(&ens, &obs, &x).unwrap();
        let a = ens.to_dense().adjoint(); // columns are a_j
        let mut p = DMatrix::zeros(3, 3);
        let mut q = DMatrix::zeros(3, 3);
        for j in 0..12 {
            let aj = a.column(j);
            let ax: C64 = ens.row(j).iter().zip(x.iter()).map(|(r, xi)| r * xi).sum();
            p += aj * aj.adjoint() * C64::new(ax.norm_sqr() / 12.0, 0.0);
            q += aj * aj.transpose() * (ax * ax / 12.0);
        }
        assert!((h.p() - p).camax() < 1e-12);
        assert!((h.q() - q).camax() < 1e-12);
    }

    #[test]
    fn apply_matches_dense() {
        let (ens, obs, _, z) = random_instance(5, 30, 6);
        let h = hessian(&ens, &obs, &z).unwrap().assemble();
        let v = DVector::from_fn(10, |i, _| c(1.0 / (1.0 + i as f64), (i as f64).cos()));
        let dense = &h * &v;
        let free = hessian_apply(&ens, &obs, &z, &v).unwrap();
        assert!((&dense - &free).norm() / dense.norm() < 1e-12);

        let zero = hessian_apply(&ens, &obs, &z, &DVector::zeros(10)).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));

        let mut e1 = DVector::zeros(10);
        e1[0] = c(1.0, 0.0);
        let col = hessian_apply(&ens, &obs, &z, &e1).unwrap();
        assert!((&col - h.column(0)).norm() / h.column(0).norm() < 1e-12);

        let blocks = hessian(&ens, &obs, &z).unwrap().mul_vec(&v).unwrap();
        assert!((&dense - &blocks).norm() / dense.norm() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let (ens, obs, _, _) = random_instance(4, 10, 1);
        let bad = SignalVector::zeros(3);
        assert!(matches!(eval_f(&ens, &obs, &bad), Err(Error::InvalidArgument(_))));
        assert!(matches!(gradient(&ens, &obs, &bad), Err(Error::InvalidArgument(_))));
        assert!(matches!(hessian(&ens, &obs, &bad), Err(Error::InvalidArgument(_))));
        let z = SignalVector::zeros(4);
        assert!(hessian_apply(&ens, &obs, &z, &DVector::zeros(7)).is_err());
        let short = obs.select(0..5);
        assert!(eval_f(&ens, &short, &z).is_err());
    }
}
