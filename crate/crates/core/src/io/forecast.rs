use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baselines::{FourierConfig, FourierData, FourierParams};
use crate::error::{Error, Result};
use crate::inference::PosteriorDraws;
use crate::model::density::predict_unchecked;
use crate::model::{predict_mean, ModelData, ModelSpec, StandardizationInfo};
use crate::timebase::CalendarDate;

pub const LOWER_LEVEL: f64 = 0.1;
pub const UPPER_LEVEL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub date: CalendarDate,
    /// Average over draws of the predictive mean.
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub model: String,
    pub rows: Vec<ForecastRow>,
}

/// Quantile `p` of the equal-weight mixture of `N(mu[s], sd[s])`.
pub fn mixture_quantile(p: f64, mu: &[f64], sd: &[f64]) -> f64 {
    let cdf = |x: f64| {
        mu.iter()
            .zip(sd)
            .map(|(m, s)| if *s > 0.0 { Normal::new(*m, *s).expect("positive sd").cdf(x) } else { f64::from(x >= *m) })
            .sum::<f64>()
            / mu.len() as f64
    };
    let spread = sd.iter().copied().fold(0.0, f64::max);
    let mut lo = mu.iter().copied().fold(f64::INFINITY, f64::min) - 10.0 * spread;
    let mut hi = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 10.0 * spread;
    if lo == hi {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Rows from per-draw original-scale means (`S x N`) and noise sds (`S`).
pub fn summarize_draws(dates: &[CalendarDate], means: &[Vec<f64>], sds: &[f64]) -> Result<Vec<ForecastRow>> {
    if means.is_empty() {
        return Err(Error::Contract("forecast needs at least one draw".into()));
    }
    let s = means.len() as f64;
    Ok(dates
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let col: Vec<f64> = means.iter().map(|r| r[i]).collect();
            ForecastRow {
                date: *d,
                point: col.iter().sum::<f64>() / s,
                lower: mixture_quantile(LOWER_LEVEL, &col, sds),
                upper: mixture_quantile(UPPER_LEVEL, &col, sds),
            }
        })
        .collect())
}

/// Predictive summary of a pooling model on `dates`.
pub fn forecast_pooling(
    model: &str,
    spec: &ModelSpec,
    info: &StandardizationInfo,
    draws: &PosteriorDraws,
    dates: &[CalendarDate],
) -> Result<Forecast> {
    let data = ModelData::for_dates(dates, None, spec, info)?;
    if let Some(p) = draws.params.first() {
        predict_mean(p, &data.t, data.pooling.as_ref(), spec)?;
    }
    let means: Vec<Vec<f64>> = draws
        .params
        .iter()
        .map(|p| {
            predict_unchecked(p, &data.t, data.pooling.as_ref()).iter().map(|v| v * info.y_sd + info.y_mean).collect()
        })
        .collect();
    let sds: Vec<f64> = draws.params.iter().map(|p| p.sigma_obs * info.y_sd).collect();
    Ok(Forecast { model: model.into(), rows: summarize_draws(dates, &means, &sds)? })
}

/// Predictive summary of a Fourier regression on `dates`.
pub fn forecast_fourier(
    model: &str,
    config: &FourierConfig,
    info: &StandardizationInfo,
    draws: &[FourierParams],
    dates: &[CalendarDate],
) -> Result<Forecast> {
    let data = FourierData::for_dates(dates, None, config, info)?;
    let means: Vec<Vec<f64>> =
        draws.iter().map(|p| p.mean(&data.t, &data.x).iter().map(|v| v * info.y_sd + info.y_mean).collect()).collect();
    let sds: Vec<f64> = draws.iter().map(|p| p.sigma_obs * info.y_sd).collect();
    Ok(Forecast { model: model.into(), rows: summarize_draws(dates, &means, &sds)? })
}

pub fn forecast_csv(f: &Forecast) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "forecast", "lower_10", "upper_90"])?;
    for r in &f.rows {
        w.write_record([r.date.to_string(), r.point.to_string(), r.lower.to_string(), r.upper.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_forecast(path: &Path, f: &Forecast) -> Result<()> {
    std::fs::write(path, forecast_csv(f)?)?;
    Ok(())
}
