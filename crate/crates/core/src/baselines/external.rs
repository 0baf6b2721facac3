use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::read_date_values;
use crate::series::TimeSeries;
use crate::timebase::CalendarDate;

/// A point forecast produced outside this crate (for example by a SARIMA tool).
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalForecast {
    pub series: TimeSeries,
}

pub fn import_external_forecast(path: &Path, name: &str) -> Result<ExternalForecast> {
    let (dates, values) = read_date_values(path)?;
    Ok(ExternalForecast { series: TimeSeries::new_unchecked_len(name, dates, values)? })
}

impl ExternalForecast {
    pub fn name(&self) -> &str {
        self.series.name()
    }

    /// Values for exactly `dates`. Missing dates are an alignment error;
    /// dates outside the request are ignored with a warning.
    pub fn align_to(&self, dates: &[CalendarDate]) -> Result<Vec<f64>> {
        let lookup: HashMap<CalendarDate, f64> =
            self.series.dates().iter().copied().zip(self.series.values().iter().copied()).collect();
        let missing: Vec<String> = dates.iter().filter(|d| !lookup.contains_key(d)).map(|d| d.to_string()).collect();
        if !missing.is_empty() {
            return Err(Error::Alignment(format!(
                "forecast '{}' is missing {} date(s): {}",
                self.name(),
                missing.len(),
                missing.join(", ")
            )));
        }
        let extra = self.series.len().saturating_sub(dates.len());
        if extra > 0 {
            log::warn!("forecast '{}': ignoring {extra} date(s) outside the requested window", self.name());
        }
        Ok(dates.iter().map(|d| lookup[d]).collect())
    }
}
