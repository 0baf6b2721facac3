use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub k_mu: f64,
    pub k_sigma: f64,
    pub m_mu: f64,
    pub m_sigma: f64,
}

/// Constrained model parameters.
///
/// `k[d][j]` and `m[d][j]` are the growth rate and offset of subcategory `j`
/// in block `d`. Complete pooling uses a single block with a single
/// subcategory and no hyperparameters; partial pooling uses one block with
/// `theta = [1]`.
///
/// The same shape is reused to hold gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub hyper: Option<Hyperparameters>,
    pub k: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub sigma_obs: f64,
}

const SIMPLEX_TOL: f64 = 1e-12;

impl ParameterSet {
    /// All-zero parameters shaped for `spec` (theta uniform, scales 1).
    pub fn template(spec: &ModelSpec) -> Self {
        let sizes = spec.block_sizes();
        let d = sizes.len();
        Self {
            hyper: spec.is_hierarchical().then_some(Hyperparameters {
                k_mu: 0.0,
                k_sigma: 1.0,
                m_mu: 0.0,
                m_sigma: 1.0,
            }),
            k: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            theta: vec![1.0 / d as f64; d],
            sigma_obs: 1.0,
        }
    }

    /// Same shape with every entry set to zero (gradient accumulator).
    pub fn zeros_like(&self) -> Self {
        Self {
            hyper: self.hyper.map(|_| Hyperparameters { k_mu: 0.0, k_sigma: 0.0, m_mu: 0.0, m_sigma: 0.0 }),
            k: self.k.iter().map(|b| vec![0.0; b.len()]).collect(),
            m: self.m.iter().map(|b| vec![0.0; b.len()]).collect(),
            theta: vec![0.0; self.theta.len()],
            sigma_obs: 0.0,
        }
    }

    /// Convenience constructor for complete pooling.
    pub fn complete(k: f64, m: f64, sigma_obs: f64) -> Self {
        Self { hyper: None, k: vec![vec![k]], m: vec![vec![m]], theta: vec![1.0], sigma_obs }
    }

    pub fn check_shape(&self, spec: &ModelSpec) -> Result<()> {
        let sizes = spec.block_sizes();
        if self.k.len() != sizes.len() || self.m.len() != sizes.len() || self.theta.len() != sizes.len() {
            return Err(Error::Config(format!(
                "parameter set has {} blocks, model '{}' expects {}",
                self.k.len(),
                spec.label(),
                sizes.len()
            )));
        }
        for (d, &n) in sizes.iter().enumerate() {
            if self.k[d].len() != n || self.m[d].len() != n {
                return Err(Error::Index(format!(
                    "block {d} has {}/{} subcategories, expected {n}",
                    self.k[d].len(),
                    self.m[d].len()
                )));
            }
        }
        if spec.is_hierarchical() != self.hyper.is_some() {
            return Err(Error::Config(format!("hyperparameter presence does not match model '{}'", spec.label())));
        }
        Ok(())
    }

    /// Shape plus positivity and simplex constraints.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        self.check_shape(spec)?;
        if !(self.sigma_obs > 0.0) {
            return Err(Error::Domain(format!("sigma_obs must be positive, got {}", self.sigma_obs)));
        }
        if let Some(h) = &self.hyper {
            if !(h.k_sigma > 0.0) || !(h.m_sigma > 0.0) {
                return Err(Error::Domain(format!(
                    "hyper scales must be positive, got k_sigma={} m_sigma={}",
                    h.k_sigma, h.m_sigma
                )));
            }
        }
        if self.theta.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Domain(format!("theta has negative entries: {:?}", self.theta)));
        }
        let sum: f64 = self.theta.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!("theta sums to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Number of scalar entries.
    pub fn n_entries(&self) -> usize {
        self.hyper.map_or(0, |_| 4)
            + self.k.iter().map(Vec::len).sum::<usize>()
            + self.m.iter().map(Vec::len).sum::<usize>()
            + self.theta.len()
            + 1
    }

    /// Flattens in the fixed order hyper, k, m, theta, sigma_obs.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_entries());
        if let Some(h) = &self.hyper {
            out.extend([h.k_mu, h.k_sigma, h.m_mu, h.m_sigma]);
        }
        self.k.iter().for_each(|b| out.extend_from_slice(b));
        self.m.iter().for_each(|b| out.extend_from_slice(b));
        out.extend_from_slice(&self.theta);
        out.push(self.sigma_obs);
        out
    }

    /// Inverse of [`ParameterSet::to_flat`] using `self` as the shape template.
    pub fn from_flat_like(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.n_entries() {
            return Err(Error::Index(format!("flat vector has {} entries, expected {}", flat.len(), self.n_entries())));
        }
        let mut it = flat.iter().copied();
        let mut next = || it.next().expect("length checked");
        let hyper =
            self.hyper.map(|_| Hyperparameters { k_mu: next(), k_sigma: next(), m_mu: next(), m_sigma: next() });
        let k = self.k.iter().map(|b| b.iter().map(|_| next()).collect()).collect();
        let m = self.m.iter().map(|b| b.iter().map(|_| next()).collect()).collect();
        let theta = self.theta.iter().map(|_| next()).collect();
        let sigma_obs = next();
        Ok(Self { hyper, k, m, theta, sigma_obs })
    }

    /// Names matching [`ParameterSet::to_flat`] order, e.g. `k[0][6]`.
    pub fn flat_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.n_entries());
        if self.hyper.is_some() {
            out.extend(["k_mu", "k_sigma", "m_mu", "m_sigma"].map(String::from));
        }
        for (d, b) in self.k.iter().enumerate() {
            out.extend((0..b.len()).map(|j| format!("k[{d}][{j}]")));
        }
        for (d, b) in self.m.iter().enumerate() {
            out.extend((0..b.len()).map(|j| format!("m[{d}][{j}]")));
        }
        out.extend((0..self.theta.len()).map(|d| format!("theta[{d}]")));
        out.push("sigma_obs".into());
        out
    }

    /// Copy with theta replaced by `theta / sum(theta)`.
    pub fn normalized_theta(&self) -> Self {
        let sum: f64 = self.theta.iter().sum();
        let mut out = self.clone();
        out.theta.iter_mut().for_each(|w| *w /= sum);
        out
    }
}
