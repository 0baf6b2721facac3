use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::timebase::{parse_date, CalendarDate};

/// One test window; training data is everything strictly before `test_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train_end_exclusive: CalendarDate,
    pub test_start: CalendarDate,
    pub test_end_inclusive: CalendarDate,
}

impl Fold {
    pub fn contains(&self, d: &CalendarDate) -> bool {
        *d >= self.test_start && *d <= self.test_end_inclusive
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub horizon_days: usize,
    pub n_folds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldSettings {
    pub first_test_start: CalendarDate,
    pub horizon: usize,
    pub n_folds: usize,
}

impl Default for FoldSettings {
    fn default() -> Self {
        Self { first_test_start: parse_date("2018-01-01").expect("valid literal"), horizon: 30, n_folds: 12 }
    }
}

impl FoldSettings {
    pub fn plan(&self, dates: &[CalendarDate]) -> Result<FoldPlan> {
        make_folds(dates, self.first_test_start, self.horizon, self.n_folds)
    }
}

/// Consecutive `horizon`-day test windows starting at `first_test_start`.
pub fn make_folds(
    dates: &[CalendarDate],
    first_test_start: CalendarDate,
    horizon: usize,
    n_folds: usize,
) -> Result<FoldPlan> {
    if horizon == 0 || n_folds == 0 {
        return Err(Error::Planning(format!("horizon ({horizon}) and fold count ({n_folds}) must be positive")));
    }
    let (Some(first), Some(last)) = (dates.first(), dates.last()) else {
        return Err(Error::Planning("no dates to plan folds over".into()));
    };
    let n_train = dates.iter().filter(|d| **d < first_test_start).count();
    if n_train < 2 {
        return Err(Error::Planning(format!(
            "first fold starts {first_test_start} but only {n_train} observation(s) precede it (need 2; data starts {first})"
        )));
    }
    let h = horizon as i64;
    let end = first_test_start.add_days(h * n_folds as i64 - 1);
    if end > *last {
        return Err(Error::Planning(format!(
            "{n_folds} folds of {horizon} days need data through {end}, but data ends {last} ({} day(s) short)",
            end.days_since(last)
        )));
    }
    let folds = (0..n_folds)
        .map(|f| {
            let test_start = first_test_start.add_days(h * f as i64);
            Fold {
                index: f,
                train_end_exclusive: test_start,
                test_start,
                test_end_inclusive: test_start.add_days(h - 1),
            }
        })
        .collect();
    Ok(FoldPlan { folds, horizon_days: horizon, n_folds })
}

impl FoldPlan {
    /// Training series (before the fold) and the observed test points inside it.
    pub fn split(&self, series: &TimeSeries, fold: &Fold) -> Result<(TimeSeries, TimeSeries)> {
        let train = series
            .before(fold.test_start)
            .filter(|s| s.len() >= 2)
            .ok_or_else(|| Error::Planning(format!("fold {} has fewer than 2 training points", fold.index + 1)))?;
        let test = series
            .slice_dates(Some(fold.test_start), Some(fold.test_end_inclusive))
            .ok_or_else(|| Error::Planning(format!("fold {} has no observed test dates", fold.index + 1)))?;
        Ok((train, test))
    }
}
