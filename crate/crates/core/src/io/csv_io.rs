use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::timebase::{parse_date, CalendarDate};

/// Rows of a `date,value` file, sorted by date. Duplicate dates are rejected.
pub fn read_date_values(path: &Path) -> Result<(Vec<CalendarDate>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "value" {
        return Err(Error::Data(format!(
            "{}: expected header 'date,value', found '{}'",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows: Vec<(CalendarDate, f64, u64)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Data(format!(
                "{} line {line}: expected 2 fields, got {}",
                path.display(),
                record.len()
            )));
        }
        let date = parse_date(&record[0]).map_err(|e| Error::Data(format!("{} line {line}: {e}", path.display())))?;
        let value: f64 = record[1].parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
            Error::Data(format!("{} line {line}: cannot parse value '{}'", path.display(), &record[1]))
        })?;
        rows.push((date, value, line));
    }
    rows.sort_by_key(|r| r.0);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            let (a, b) = (w[0].2.min(w[1].2), w[0].2.max(w[1].2));
            return Err(Error::Data(format!(
                "{} line {b}: duplicate date {} (first seen on line {a})",
                path.display(),
                w[1].0
            )));
        }
    }
    Ok(rows.into_iter().map(|(d, v, _)| (d, v)).unzip())
}

/// Loads a daily series from a `date,value` CSV. The series is named after the file stem.
pub fn load_csv(path: &Path) -> Result<TimeSeries> {
    let (dates, values) = read_date_values(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "series".into());
    TimeSeries::new(name, dates, values)
}

/// Writes `date,value` rows. Values use the shortest round-trip representation.
pub fn write_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "value"])?;
    for (d, v) in series.dates().iter().zip(series.values()) {
        w.write_record([d.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_rows() {
        let f = file("date,value\n2018-01-01,10\n2018-01-02,12");
        let s = load_csv(f.path()).unwrap();
        assert_eq!(s.values(), &[10.0, 12.0]);
    }

    #[test]
    fn duplicate_date_names_the_line() {
        let f = file("date,value\n2018-01-01,10\n2018-01-02,12\n2018-01-01,3\n");
        let err = load_csv(f.path()).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
    }

    #[test]
    fn bad_value_names_the_line() {
        let f = file("date,value\n2018-01-01,10\n2018-01-02,abc\n");
        let err = load_csv(f.path()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let f = file("date,value\n2018-01-03,3\n2018-01-01,1\n2018-01-02,2\n");
        let s = load_csv(f.path()).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn round_trip_is_lossless() {
        let f = file("date,value\n2018-01-01,0.1\n2018-01-05,123456.789012345678\n2018-01-06,-1e-300\n");
        let s = load_csv(f.path()).unwrap();
        let out = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        write_csv(out.path(), &s).unwrap();
        let back = load_csv(out.path()).unwrap();
        assert_eq!(back.values(), s.values());
        assert_eq!(back.dates(), s.dates());
    }
}
