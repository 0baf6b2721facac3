use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::PosteriorDraws;
use crate::model::density::pointwise_unchecked;
use crate::model::{ModelData, ModelSpec, StandardizationInfo};
use crate::series::TimeSeries;

/// What [`mape`] does with an actual value of zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "epsilon")]
pub enum ZeroPolicy {
    #[default]
    Error,
    /// Denominators are floored at `epsilon` (original scale).
    Floor(f64),
}

/// `100 * mean |a - f| / |a|`.
pub fn mape(actual: &[f64], forecast: &[f64], zero: ZeroPolicy) -> Result<f64> {
    if actual.len() != forecast.len() {
        return Err(Error::Config(format!("{} actuals vs {} forecasts", actual.len(), forecast.len())));
    }
    if actual.is_empty() {
        return Err(Error::Data("MAPE of an empty window".into()));
    }
    let mut total = 0.0;
    for (i, (a, f)) in actual.iter().zip(forecast).enumerate() {
        let denom = match zero {
            ZeroPolicy::Error if *a == 0.0 => {
                return Err(Error::Domain(format!("actual value at index {i} is zero; MAPE is undefined")))
            }
            ZeroPolicy::Error => a.abs(),
            ZeroPolicy::Floor(eps) => a.abs().max(eps),
        };
        total += (a - f).abs() / denom;
    }
    Ok(100.0 * total / actual.len() as f64)
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDensity {
    pub per_point: Vec<f64>,
    pub total: f64,
}

/// `log((1/S) sum_s exp(loglik[s][i])) - ln(y_sd)` for a `S x N` draws-by-points matrix.
pub fn lpd_from_loglik(loglik: &[Vec<f64>], y_sd: f64) -> Result<PredictiveDensity> {
    let Some(first) = loglik.first() else {
        return Err(Error::Contract("predictive density needs at least one draw".into()));
    };
    let n = first.len();
    if loglik.iter().any(|r| r.len() != n) {
        return Err(Error::Config("ragged log-likelihood matrix".into()));
    }
    let ln_s = (loglik.len() as f64).ln();
    let jac = y_sd.ln();
    let per_point: Vec<f64> = (0..n).map(|i| log_sum_exp(loglik.iter().map(|r| r[i])) - ln_s - jac).collect();
    let total = per_point.iter().sum();
    Ok(PredictiveDensity { per_point, total })
}

/// `S x N` pointwise log likelihood of `data` under each draw.
pub fn loglik_matrix(draws: &PosteriorDraws, data: &ModelData, spec: &ModelSpec) -> Result<Vec<Vec<f64>>> {
    if draws.is_empty() {
        return Err(Error::Contract("no posterior draws".into()));
    }
    if let Some(p) = draws.params.first() {
        crate::model::pointwise_log_lik(p, data, spec)?;
    }
    Ok(draws.params.iter().map(|p| pointwise_unchecked(p, data)).collect())
}

/// Out-of-sample log predictive density of `test` on the original scale.
/// Time and pooling are built with the training standardization `info`.
pub fn test_log_predictive_density(
    draws: &PosteriorDraws,
    spec: &ModelSpec,
    test: &TimeSeries,
    info: &StandardizationInfo,
) -> Result<PredictiveDensity> {
    if draws.is_empty() {
        return Err(Error::Contract("test log predictive density needs at least one draw".into()));
    }
    let data = ModelData::for_dates(test.dates(), Some(test.values()), spec, info)?;
    lpd_from_loglik(&loglik_matrix(draws, &data, spec)?, info.y_sd)
}
