use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::forecast::{forecast_fourier, forecast_pooling, Forecast};
use crate::baselines::{fit_fourier, fourier_draws, FourierFit, FourierParams};
use crate::error::{Error, Result};
use crate::evaluation::{ModelEntry, ModelEntryKind};
use crate::inference::{laplace_at, laplace_draws, map_fit, PoolingFit, PosteriorDraws, TraceRow};
use crate::model::ModelData;
use crate::series::TimeSeries;
use crate::timebase::CalendarDate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Fitted {
    Pooling {
        fit: PoolingFit,
        draws: Option<PosteriorDraws>,
        /// Laplace marginal sds in the centered layout of `Bijection::new`.
        laplace_sd: Option<Vec<f64>>,
    },
    Fourier {
        fit: FourierFit,
        draws: Option<Vec<FourierParams>>,
    },
}

/// A fitted model as written by `fit` and read by `forecast` and `plot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub model: String,
    pub dataset: String,
    pub train_start: CalendarDate,
    pub train_end: CalendarDate,
    pub fitted: Fitted,
    /// Why posterior draws are missing, if they are.
    pub draw_error: Option<String>,
}

impl FitArtifact {
    pub fn converged(&self) -> bool {
        match &self.fitted {
            Fitted::Pooling { fit, .. } => fit.map.converged,
            Fitted::Fourier { fit, .. } => fit.converged,
        }
    }

    pub fn trace(&self) -> &[TraceRow] {
        match &self.fitted {
            Fitted::Pooling { fit, .. } => &fit.map.trace,
            Fitted::Fourier { fit, .. } => &fit.trace,
        }
    }

    pub fn has_draws(&self) -> bool {
        match &self.fitted {
            Fitted::Pooling { draws, .. } => draws.is_some(),
            Fitted::Fourier { draws, .. } => draws.is_some(),
        }
    }

    /// Predictive summary on `dates`. Without draws the MAP is used as a
    /// single draw, so intervals reflect observation noise only.
    pub fn forecast(&self, dates: &[CalendarDate]) -> Result<Forecast> {
        if !self.has_draws() {
            log::warn!("{}: no posterior draws, forecasting from the MAP alone", self.model);
        }
        match &self.fitted {
            Fitted::Pooling { fit, draws, .. } => {
                let point;
                let d = match draws {
                    Some(d) => d,
                    None => {
                        point = PosteriorDraws::point(&fit.map.params, &fit.map.unconstrained_opt, 1);
                        &point
                    }
                };
                forecast_pooling(&self.model, &fit.spec, &fit.info, d, dates)
            }
            Fitted::Fourier { fit, draws } => {
                let single = [fit.params.clone()];
                let d = draws.as_deref().unwrap_or(&single);
                forecast_fourier(&self.model, &fit.config, &fit.info, d, dates)
            }
        }
    }

    /// `horizon` consecutive days after the training window.
    pub fn forecast_ahead(&self, horizon: usize) -> Result<Forecast> {
        let dates: Vec<CalendarDate> = (1..=horizon as i64).map(|h| self.train_end.add_days(h)).collect();
        self.forecast(&dates)
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,phase,objective,grad_norm\n");
        for r in self.trace() {
            let phase =
                serde_json::to_value(r.phase).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", r.iteration, phase, r.objective, r.grad_norm));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read fit {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{} is not a fit artifact: {e}", path.display())))
    }
}

/// Fits one configured model on `series` and, when the MAP converged, draws
/// `cfg.draws` Laplace samples.
pub fn fit_entry(entry: &ModelEntry, series: &TimeSeries, cfg: &RunConfig) -> Result<FitArtifact> {
    let (fitted, draw_error) = match &entry.kind {
        ModelEntryKind::Pooling(spec) => {
            let fit = map_fit(series, spec, &cfg.map_options())?;
            let laplace = ModelData::prepare(series, spec).and_then(|(data, _)| {
                let draws = laplace_draws(&fit.map, &data, spec, cfg.draws, cfg.seed)?;
                Ok((draws, laplace_at(&fit.map, &data, spec)?.marginal_sd()))
            });
            let (laplace, err) = split(laplace);
            let (draws, laplace_sd) = laplace.unzip();
            (Fitted::Pooling { fit, draws, laplace_sd }, err)
        }
        ModelEntryKind::Fourier(config) => {
            let fit = fit_fourier(series, config, &cfg.fourier_options())?;
            let (draws, err) = split(fourier_draws(&fit, series, cfg.draws, cfg.seed));
            (Fitted::Fourier { fit, draws }, err)
        }
        ModelEntryKind::External(_) => {
            return Err(Error::Config(format!("'{}' is an imported forecast and cannot be fitted", entry.name)))
        }
    };
    Ok(FitArtifact {
        model: entry.name.clone(),
        dataset: series.name().to_string(),
        train_start: series.first_date(),
        train_end: series.last_date(),
        fitted,
        draw_error,
    })
}

fn split<T>(r: Result<T>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => {
            log::warn!("no posterior draws: {e}");
            (None, Some(format!("{}: {e}", e.category())))
        }
    }
}
