//! Finite-difference Hessians and Gaussian (Laplace) posterior draws.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::objective::LogDensity;
use crate::error::{Error, Result};

/// Central differences of the analytic gradient, symmetrized.
pub fn hessian_at(target: &dyn LogDensity, v: &[f64]) -> Result<DMatrix<f64>> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!("hessian requested at non-finite coordinate {i}")));
    }
    let n = v.len();
    let mut h = DMatrix::zeros(n, n);
    let mut x = v.to_vec();
    for j in 0..n {
        let eps = 1e-5 * v[j].abs().max(1.0);
        x[j] = v[j] + eps;
        let (_, gp) = target.log_density_and_grad(&x)?;
        x[j] = v[j] - eps;
        let (_, gm) = target.log_density_and_grad(&x)?;
        x[j] = v[j];
        for i in 0..n {
            let val = (gp[i] - gm[i]) / (2.0 * eps);
            if !val.is_finite() {
                return Err(Error::Numerical(format!("non-finite hessian entry ({i}, {j})")));
            }
            h[(i, j)] = val;
        }
    }
    let ht = h.transpose();
    Ok((h + ht) * 0.5)
}

/// Gaussian approximation `N(mode, (-H)^-1)` in unconstrained space.
#[derive(Debug, Clone)]
pub struct LaplaceApprox {
    pub mode: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Any `F` with `F F^T = covariance`; draws are `mode + F z`.
    factor: DMatrix<f64>,
    pub jitter: f64,
}

impl LaplaceApprox {
    pub fn at_mode(target: &dyn LogDensity, mode: &[f64]) -> Result<Self> {
        let h = hessian_at(target, mode)?;
        Self::from_hessian(mode, &h)
    }

    pub fn from_hessian(mode: &[f64], hessian: &DMatrix<f64>) -> Result<Self> {
        let n = mode.len();
        let neg_h = -hessian.clone();
        let mut lambdas = vec![0.0];
        lambdas.extend((0..7).map(|i| 1e-8 * 10f64.powi(i)));
        for lambda in lambdas {
            let m = &neg_h + DMatrix::identity(n, n) * lambda;
            if let Some(chol) = m.clone().cholesky() {
                // (L L^T)^-1 = L^-T L^-1, so L^-T is a factor of the covariance.
                let l_inv_t = chol
                    .l()
                    .transpose()
                    .solve_upper_triangular(&DMatrix::identity(n, n))
                    .expect("cholesky factor has positive diagonal");
                let cov = &l_inv_t * l_inv_t.transpose();
                return Ok(Self { mode: mode.to_vec(), covariance: cov, factor: l_inv_t, jitter: lambda });
            }
        }
        Err(Error::Curvature(
            "negative Hessian is not positive definite even with jitter 1e-2; \
             the mode may be a saddle or the model poorly identified by this data"
                .into(),
        ))
    }

    pub fn marginal_sd(&self) -> Vec<f64> {
        (0..self.mode.len()).map(|i| self.covariance[(i, i)].sqrt()).collect()
    }

    /// The same approximation pushed through a smooth change of coordinates
    /// `f`, linearized at the mode: `N(f(mode), J cov J^T)`.
    pub fn reparameterize(&self, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let mode = f(&self.mode)?;
        let n = self.mode.len();
        let mut jac = DMatrix::zeros(mode.len(), n);
        let mut x = self.mode.clone();
        for j in 0..n {
            let eps = 1e-6 * self.mode[j].abs().max(1.0);
            x[j] = self.mode[j] + eps;
            let up = f(&x)?;
            x[j] = self.mode[j] - eps;
            let down = f(&x)?;
            x[j] = self.mode[j];
            for i in 0..mode.len() {
                jac[(i, j)] = (up[i] - down[i]) / (2.0 * eps);
            }
        }
        let factor = &jac * &self.factor;
        let covariance = &factor * factor.transpose();
        Ok(Self { mode, covariance, factor, jitter: self.jitter })
    }

    /// `n` seeded draws `mode + F z` with `z` standard normal.
    pub fn sample(&self, n: usize, rng: &mut impl rand::Rng) -> Vec<Vec<f64>> {
        let dim = self.factor.ncols();
        (0..n)
            .map(|_| {
                let z = DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(rng)));
                let x = &self.factor * z;
                x.iter().zip(&self.mode).map(|(a, b)| a + b).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrawSource {
    Laplace,
    /// Every draw equals the mode (plug-in prediction).
    Point,
}
