use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::timebase::TimeScale;

/// How a training series was mapped onto the model scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationInfo {
    pub y_mean: f64,
    pub y_sd: f64,
    pub time_scale: TimeScale,
}

impl StandardizationInfo {
    /// Identity value map with time measured in raw days from `origin`.
    pub fn identity(origin: crate::timebase::CalendarDate) -> Self {
        Self { y_mean: 0.0, y_sd: 1.0, time_scale: TimeScale { origin, span_days: 1 } }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.y_mean) / self.y_sd).collect()
    }
}

/// Z-scores the values (population sd) and spans the dates onto `[0, 1]`.
pub fn standardize(series: &TimeSeries) -> Result<(Vec<f64>, StandardizationInfo)> {
    let y = series.values();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 0.0) || sd <= 1e-12 * mean.abs().max(1.0) {
        return Err(Error::Degenerate(format!("series '{}' is constant; cannot standardize", series.name())));
    }
    let info = StandardizationInfo { y_mean: mean, y_sd: sd, time_scale: TimeScale::spanning(series.dates())? };
    Ok((info.apply(y), info))
}

pub fn destandardize(y_std: &[f64], info: &StandardizationInfo) -> Vec<f64> {
    y_std.iter().map(|v| v * info.y_sd + info.y_mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timebase::{date_range, parse_date};

    fn series(vals: &[f64]) -> TimeSeries {
        let start = parse_date("2018-01-01").unwrap();
        let dates = date_range(start, start.add_days(vals.len() as i64 - 1));
        TimeSeries::new("s", dates, vals.to_vec()).unwrap()
    }

    #[test]
    fn population_sd_convention() {
        let (z, info) = standardize(&series(&[10.0, 20.0, 30.0])).unwrap();
        // sd = sqrt(200/3)
        let expect = 10.0 / (200.0f64 / 3.0).sqrt();
        assert!((z[0] + expect).abs() < 1e-12);
        assert!(z[1].abs() < 1e-12);
        assert!((z[2] - 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(info.time_scale.span_days, 2);
        let back = destandardize(&z, &info);
        for (a, b) in back.iter().zip([10.0, 20.0, 30.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(standardize(&series(&[5.0, 5.0, 5.0])), Err(Error::Degenerate(_))));
    }
}
