//! Calendar arithmetic, seasonal pooling indices and the scaled time axis.
//!
//! Dates are civil dates in the proleptic Gregorian calendar with no time
//! zone. Internally every date converts to a day number counted from
//! 1970-01-01, which makes differences and offsets plain integer arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A valid civil date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CalendarDate {
    year: i32,
    month: u32,
    day: u32,
}

pub fn is_leap_year(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => 0,
    }
}

impl CalendarDate {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Parse(format!("invalid month {month} (expected 1-12)")));
        }
        let dim = days_in_month(year, month);
        if day == 0 || day > dim {
            return Err(Error::Parse(format!("invalid day {day} for {year:04}-{month:02} (month has {dim} days)")));
        }
        Ok(Self { year, month, day })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    /// Days since 1970-01-01 (negative before).
    pub fn day_number(&self) -> i64 {
        // Hinnant's days_from_civil.
        let y = i64::from(self.year) - i64::from(self.month <= 2);
        let m = i64::from(self.month);
        let d = i64::from(self.day);
        let era = y.div_euclid(400);
        let yoe = y - era * 400;
        let mp = (m + 9) % 12;
        let doy = (153 * mp + 2) / 5 + d - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    pub fn from_day_number(z: i64) -> Self {
        let z = z + 719_468;
        let era = z.div_euclid(146_097);
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
        let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
        let year = (yoe + era * 400 + i64::from(month <= 2)) as i32;
        Self { year, month, day }
    }

    pub fn add_days(&self, days: i64) -> Self {
        Self::from_day_number(self.day_number() + days)
    }

    /// `self - other` in days.
    pub fn days_since(&self, other: &CalendarDate) -> i64 {
        self.day_number() - other.day_number()
    }

    pub fn succ(&self) -> Self {
        self.add_days(1)
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// Parses an ISO-8601 `YYYY-MM-DD` date.
pub fn parse_date(text: &str) -> Result<CalendarDate> {
    let text = text.trim();
    let parts: Vec<&str> = text.split('-').collect();
    if parts.len() != 3 || parts[0].len() != 4 || parts[1].len() != 2 || parts[2].len() != 2 {
        return Err(Error::Parse(format!("malformed date '{text}' (expected YYYY-MM-DD)")));
    }
    let field = |name: &str, s: &str| -> Result<u32> {
        if !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(format!("invalid {name} '{s}' in date '{text}'")));
        }
        s.parse::<u32>().map_err(|_| Error::Parse(format!("invalid {name} '{s}' in date '{text}'")))
    };
    let year = field("year", parts[0])? as i32;
    let month = field("month", parts[1])?;
    let day = field("day", parts[2])?;
    CalendarDate::new(year, month, day).map_err(|e| Error::Parse(format!("date '{text}': {e}")))
}

impl FromStr for CalendarDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_date(s)
    }
}

impl Serialize for CalendarDate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CalendarDate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_date(&s).map_err(serde::de::Error::custom)
    }
}

/// Monday = 0, ..., Sunday = 6.
pub fn day_of_week(d: &CalendarDate) -> usize {
    // 1970-01-01 was a Thursday (index 3).
    (d.day_number() + 3).rem_euclid(7) as usize
}

/// Zero-based day of month, 0..=30.
pub fn day_of_month(d: &CalendarDate) -> usize {
    (d.day - 1) as usize
}

/// A calendar seasonality dimension used for pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeasonalityKind {
    #[serde(rename = "week", alias = "day_of_week", alias = "DayOfWeek")]
    DayOfWeek,
    #[serde(rename = "month", alias = "day_of_month", alias = "DayOfMonth")]
    DayOfMonth,
}

impl SeasonalityKind {
    pub fn cardinality(&self) -> usize {
        match self {
            SeasonalityKind::DayOfWeek => 7,
            SeasonalityKind::DayOfMonth => 31,
        }
    }

    pub fn index(&self, d: &CalendarDate) -> usize {
        match self {
            SeasonalityKind::DayOfWeek => day_of_week(d),
            SeasonalityKind::DayOfMonth => day_of_month(d),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SeasonalityKind::DayOfWeek => "week",
            SeasonalityKind::DayOfMonth => "month",
        }
    }
}

impl fmt::Display for SeasonalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeasonalityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "week" | "day_of_week" | "dayofweek" | "dow" => Ok(SeasonalityKind::DayOfWeek),
            "month" | "day_of_month" | "dayofmonth" | "dom" => Ok(SeasonalityKind::DayOfMonth),
            other => Err(Error::Config(format!("unknown seasonality '{other}' (expected week|month)"))),
        }
    }
}

/// Rejects empty or duplicated seasonality lists.
pub fn validate_dims(dims: &[SeasonalityKind]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::Config("at least one seasonality dimension is required".into()));
    }
    for (i, a) in dims.iter().enumerate() {
        if dims[..i].contains(a) {
            return Err(Error::Config(format!("duplicate seasonality dimension '{a}'")));
        }
    }
    Ok(())
}

/// Per-observation subcategory indices, one column per seasonality dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolingAssignment {
    dims: Vec<SeasonalityKind>,
    /// Row-major `T x D`.
    indices: Vec<usize>,
}

impl PoolingAssignment {
    /// Builds an assignment from raw indices, checking every entry is in range.
    pub fn from_indices(dims: Vec<SeasonalityKind>, rows: &[Vec<usize>]) -> Result<Self> {
        validate_dims(&dims)?;
        let d = dims.len();
        let mut indices = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Config(format!("pooling row {i} has {} columns, expected {d}", row.len())));
            }
            for (c, &j) in row.iter().enumerate() {
                if j >= dims[c].cardinality() {
                    return Err(Error::Index(format!(
                        "pooling index {j} at row {i} out of range for '{}' (cardinality {})",
                        dims[c],
                        dims[c].cardinality()
                    )));
                }
                indices.push(j);
            }
        }
        Ok(Self { dims, indices })
    }

    pub fn dims(&self) -> &[SeasonalityKind] {
        &self.dims
    }

    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, dim: usize) -> usize {
        self.indices[row * self.dims.len() + dim]
    }

    pub fn row(&self, row: usize) -> &[usize] {
        let d = self.dims.len();
        &self.indices[row * d..(row + 1) * d]
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let d = self.dims.len();
        let mut indices = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            indices.extend_from_slice(self.row(r));
        }
        Self { dims: self.dims.clone(), indices }
    }
}

pub fn build_pooling(dates: &[CalendarDate], dims: &[SeasonalityKind]) -> Result<PoolingAssignment> {
    validate_dims(dims)?;
    if dates.is_empty() {
        return Err(Error::Config("cannot build pooling for an empty date list".into()));
    }
    let mut indices = Vec::with_capacity(dates.len() * dims.len());
    for date in dates {
        for dim in dims {
            indices.push(dim.index(date));
        }
    }
    Ok(PoolingAssignment { dims: dims.to_vec(), indices })
}

/// Linear map from dates to model time: `origin -> 0`, `origin + span_days -> 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeScale {
    pub origin: CalendarDate,
    pub span_days: i64,
}

impl TimeScale {
    pub fn new(origin: CalendarDate, span_days: i64) -> Result<Self> {
        if span_days < 1 {
            return Err(Error::Domain(format!("time scale span must be >= 1 day, got {span_days}")));
        }
        Ok(Self { origin, span_days })
    }

    /// Scale mapping the first and last of `dates` onto 0 and 1.
    pub fn spanning(dates: &[CalendarDate]) -> Result<Self> {
        let (first, last) = match (dates.first(), dates.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(Error::Domain("cannot span an empty date list".into())),
        };
        Self::new(first, last.days_since(&first).max(1))
    }

    pub fn offset_days(&self, date: &CalendarDate) -> Result<i64> {
        let off = date.days_since(&self.origin);
        if off < 0 {
            return Err(Error::Domain(format!("date {date} precedes time origin {}", self.origin)));
        }
        Ok(off)
    }
}

pub fn scaled_time(dates: &[CalendarDate], scale: &TimeScale) -> Result<Vec<f64>> {
    dates.iter().map(|d| Ok(scale.offset_days(d)? as f64 / scale.span_days as f64)).collect()
}

/// Raw day offsets from the scale origin (used by Fourier features).
pub fn day_offsets(dates: &[CalendarDate], scale: &TimeScale) -> Result<Vec<f64>> {
    dates.iter().map(|d| Ok(scale.offset_days(d)? as f64)).collect()
}

/// Every date from `start` to `end` inclusive.
pub fn date_range(start: CalendarDate, end: CalendarDate) -> Vec<CalendarDate> {
    let n = end.days_since(&start);
    if n < 0 {
        return Vec::new();
    }
    (0..=n).map(|i| start.add_days(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> CalendarDate {
        parse_date(s).unwrap()
    }

    #[test]
    fn parses_valid_and_rejects_invalid_dates() {
        let x = d("2018-01-01");
        assert_eq!((x.year(), x.month(), x.day()), (2018, 1, 1));
        let err = parse_date("2018-02-30").unwrap_err();
        assert!(err.to_string().contains("day"), "{err}");
        assert!(parse_date("2018-13-01").unwrap_err().to_string().contains("month"));
        assert!(parse_date("2018-1-01").is_err());
        assert!(parse_date("20x8-01-01").unwrap_err().to_string().contains("year"));
        assert!(parse_date("2019-02-29").is_err());
        assert_eq!(d("2020-02-29").day(), 29);
    }

    #[test]
    fn weekday_anchors() {
        assert_eq!(day_of_week(&d("2018-01-01")), 0);
        assert_eq!(day_of_week(&d("2017-01-01")), 6);
        assert_eq!(day_of_week(&d("2018-01-07")), 6);
    }

    #[test]
    fn day_of_month_offsets() {
        assert_eq!(day_of_month(&d("2018-01-31")), 30);
        assert_eq!(day_of_month(&d("2018-02-01")), 0);
        let feb = date_range(d("2018-02-01"), d("2018-02-28"));
        assert!(feb.iter().all(|x| day_of_month(x) < 28));
    }

    #[test]
    fn pooling_rows_follow_dims_order() {
        let p = build_pooling(&[d("2018-01-01")], &[SeasonalityKind::DayOfWeek, SeasonalityKind::DayOfMonth]).unwrap();
        assert_eq!(p.row(0), &[0, 0]);
        let p = build_pooling(&[d("2018-01-07")], &[SeasonalityKind::DayOfWeek]).unwrap();
        assert_eq!(p.row(0), &[6]);
        let err = build_pooling(&[d("2018-01-07")], &[SeasonalityKind::DayOfWeek, SeasonalityKind::DayOfWeek]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn scaled_time_examples() {
        let scale = TimeScale::new(d("2017-01-01"), 729).unwrap();
        let t = scaled_time(&[d("2017-01-01"), d("2018-12-31"), d("2019-01-30")], &scale).unwrap();
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1], 1.0);
        assert!((t[2] - 759.0 / 729.0).abs() < 1e-15);
        assert!(scaled_time(&[d("2016-12-31")], &scale).is_err());
        assert!(TimeScale::new(d("2017-01-01"), 0).is_err());
    }

    #[test]
    fn from_indices_checks_range() {
        let err = PoolingAssignment::from_indices(vec![SeasonalityKind::DayOfWeek], &[vec![7]]);
        assert!(matches!(err, Err(Error::Index(_))));
    }

    #[test]
    fn serde_uses_iso_strings() {
        let x = d("2018-03-04");
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "\"2018-03-04\"");
        let back: CalendarDate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
    }
}
