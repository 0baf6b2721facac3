//! Pooling models of seasonality.
//!
//! Three kinds share one parameterization:
//!
//! * `Complete`: a single trend `k t + m` for every observation.
//! * `Partial(dim)`: one `(k, m)` pair per subcategory of `dim` (e.g. per
//!   weekday), drawn from shared hyperpriors `N(k_mu, k_sigma)`,
//!   `N(m_mu, m_sigma)`.
//! * `Mixed(dims)`: one partial-pooling parameter set per dimension, mixed
//!   linearly with simplex weights `theta`:
//!   `yhat = (sum_d theta_d k[d][pool_d]) t + sum_d theta_d m[d][pool_d]`.
//!
//! Parameters are stored ragged: dimension `d` holds exactly
//! `dims[d].cardinality()` subcategories.

pub(crate) mod density;
mod params;
mod standardize;

pub use density::{
    grad_constrained, log_likelihood, log_posterior, log_prior, pointwise_log_lik, predict_mean, ModelData,
};
pub use params::{Hyperparameters, ParameterSet};
pub use standardize::{destandardize, standardize, StandardizationInfo};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timebase::{validate_dims, SeasonalityKind};

/// Scales of the fixed priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConstants {
    /// Scale of the `N(0, s)` prior on the trend hypermean (or on `k` for complete pooling).
    pub trend_loc_scale: f64,
    /// Scale of the `N(0, s)` prior on the offset hypermean (or on `m` for complete pooling).
    pub offset_loc_scale: f64,
    /// Rate of the exponential priors on `k_sigma` and `m_sigma`.
    pub hyper_sd_rate: f64,
    /// Scale of the half-normal prior on `sigma_obs`.
    pub noise_sd_scale: f64,
}

impl Default for PriorConstants {
    fn default() -> Self {
        Self { trend_loc_scale: 5.0, offset_loc_scale: 5.0, hyper_sd_rate: 1.0, noise_sd_scale: 0.5 }
    }
}

impl PriorConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("trend_loc_scale", self.trend_loc_scale),
            ("offset_loc_scale", self.offset_loc_scale),
            ("hyper_sd_rate", self.hyper_sd_rate),
            ("noise_sd_scale", self.noise_sd_scale),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("prior constant {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dims", rename_all = "lowercase")]
pub enum ModelKind {
    Complete,
    Partial(SeasonalityKind),
    Mixed(Vec<SeasonalityKind>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub priors: PriorConstants,
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    pub fn complete() -> Self {
        Self { kind: ModelKind::Complete, priors: PriorConstants::default(), standardize: true }
    }

    pub fn partial(dim: SeasonalityKind) -> Self {
        Self { kind: ModelKind::Partial(dim), priors: PriorConstants::default(), standardize: true }
    }

    /// Mixed pooling over `dims`. A single dimension is accepted and behaves
    /// exactly like partial pooling on that dimension.
    pub fn mixed(dims: Vec<SeasonalityKind>) -> Result<Self> {
        let spec = Self { kind: ModelKind::Mixed(dims), priors: PriorConstants::default(), standardize: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_priors(mut self, priors: PriorConstants) -> Self {
        self.priors = priors;
        self
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        if let ModelKind::Mixed(dims) = &self.kind {
            validate_dims(dims)?;
        }
        Ok(())
    }

    /// Seasonality dimensions used for pooling (empty for complete pooling).
    pub fn dims(&self) -> Vec<SeasonalityKind> {
        match &self.kind {
            ModelKind::Complete => Vec::new(),
            ModelKind::Partial(d) => vec![*d],
            ModelKind::Mixed(ds) => ds.clone(),
        }
    }

    /// Number of parameter blocks (1 for complete and partial pooling).
    pub fn n_blocks(&self) -> usize {
        match &self.kind {
            ModelKind::Mixed(ds) => ds.len(),
            _ => 1,
        }
    }

    /// Subcategory count of each block.
    pub fn block_sizes(&self) -> Vec<usize> {
        match &self.kind {
            ModelKind::Complete => vec![1],
            ModelKind::Partial(d) => vec![d.cardinality()],
            ModelKind::Mixed(ds) => ds.iter().map(|d| d.cardinality()).collect(),
        }
    }

    pub fn is_hierarchical(&self) -> bool {
        !matches!(self.kind, ModelKind::Complete)
    }

    /// Whether `theta` is a free parameter.
    pub fn has_free_theta(&self) -> bool {
        matches!(self.kind, ModelKind::Mixed(_))
    }

    /// Short label such as `complete`, `partial-week`, `mixed-week+month`.
    pub fn label(&self) -> String {
        match &self.kind {
            ModelKind::Complete => "complete".into(),
            ModelKind::Partial(d) => format!("partial-{d}"),
            ModelKind::Mixed(ds) => {
                let names: Vec<&str> = ds.iter().map(|d| d.name()).collect();
                format!("mixed-{}", names.join("+"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_rejects_duplicates() {
        assert!(ModelSpec::mixed(vec![SeasonalityKind::DayOfWeek, SeasonalityKind::DayOfWeek]).is_err());
        assert!(ModelSpec::mixed(vec![]).is_err());
        let s = ModelSpec::mixed(vec![SeasonalityKind::DayOfWeek, SeasonalityKind::DayOfMonth]).unwrap();
        assert_eq!(s.block_sizes(), vec![7, 31]);
        assert_eq!(s.label(), "mixed-week+month");
    }

    #[test]
    fn priors_must_be_positive() {
        let p = PriorConstants { hyper_sd_rate: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn spec_serde_round_trip() {
        let s = ModelSpec::partial(SeasonalityKind::DayOfMonth);
        let j = serde_json::to_string(&s).unwrap();
        let back: ModelSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
