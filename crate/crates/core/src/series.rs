use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timebase::CalendarDate;

/// Dated daily observations.
///
/// Dates are strictly increasing but need not be contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    dates: Vec<CalendarDate>,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Validated constructor: at least two points, strictly increasing dates, finite values.
    pub fn new(name: impl Into<String>, dates: Vec<CalendarDate>, values: Vec<f64>) -> Result<Self> {
        let s = Self::new_unchecked_len(name, dates, values)?;
        if s.len() < 2 {
            return Err(Error::Data(format!("series '{}' needs at least 2 observations, got {}", s.name, s.len())));
        }
        Ok(s)
    }

    /// Like [`TimeSeries::new`] but allows a single observation (forecast
    /// horizons and held-out points).
    pub fn new_unchecked_len(name: impl Into<String>, dates: Vec<CalendarDate>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if dates.len() != values.len() {
            return Err(Error::Data(format!("series '{name}': {} dates but {} values", dates.len(), values.len())));
        }
        if dates.is_empty() {
            return Err(Error::Data(format!("series '{name}' is empty")));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Data(format!(
                    "series '{name}': dates must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("series '{name}': non-finite value at {}", dates[i])));
        }
        Ok(Self { name, dates, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dates(&self) -> &[CalendarDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn first_date(&self) -> CalendarDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> CalendarDate {
        self.dates[self.dates.len() - 1]
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Observations with `start <= date <= end`; `None` when nothing falls in range.
    pub fn slice_dates(&self, start: Option<CalendarDate>, end: Option<CalendarDate>) -> Option<TimeSeries> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| start.is_none_or(|s| self.dates[i] >= s) && end.is_none_or(|e| self.dates[i] <= e))
            .collect();
        if keep.is_empty() {
            return None;
        }
        Some(TimeSeries {
            name: self.name.clone(),
            dates: keep.iter().map(|&i| self.dates[i]).collect(),
            values: keep.iter().map(|&i| self.values[i]).collect(),
        })
    }

    /// Observations strictly before `date`.
    pub fn before(&self, date: CalendarDate) -> Option<TimeSeries> {
        self.slice_dates(None, Some(date.add_days(-1)))
    }
}
