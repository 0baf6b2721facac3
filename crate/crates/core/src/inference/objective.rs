use super::bijection::{Bijection, Parameterization};
use crate::error::Result;
use crate::model::{ModelData, ModelSpec, ParameterSet};

/// A differentiable log density over an unconstrained vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density_and_grad(x)?.0)
    }
}

/// Jacobian-adjusted log posterior of a pooling model in unconstrained space.
#[derive(Debug, Clone)]
pub struct PoolingPosterior<'a> {
    pub spec: &'a ModelSpec,
    pub data: &'a ModelData,
    pub bijection: Bijection,
}

impl<'a> PoolingPosterior<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a ModelData) -> Result<Self> {
        Self::with_parameterization(spec, data, Parameterization::CENTERED)
    }

    pub fn with_parameterization(spec: &'a ModelSpec, data: &'a ModelData, param: Parameterization) -> Result<Self> {
        let bijection = Bijection::with_parameterization(spec, param)?;
        // Layout validation against a template catches pooling mismatches up front.
        crate::model::predict_mean(&ParameterSet::template(spec), &data.t, data.pooling.as_ref(), spec)?;
        Ok(Self { spec, data, bijection })
    }
}

impl LogDensity for PoolingPosterior<'_> {
    fn dim(&self) -> usize {
        self.bijection.dim()
    }

    fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let c = self.bijection.constrain(x)?;
        let (lp, g) = crate::model::density::value_and_grad_unchecked(&c.params, self.data, self.spec);
        let grad = self.bijection.pullback(&c, &g);
        Ok((lp + c.log_jacobian, grad))
    }
}
