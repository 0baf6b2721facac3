//! SVG figures, each emitted next to a CSV holding the plotted numbers.
//!
//! Plotted values are also stored on the SVG elements as `data-*`
//! attributes, formatted exactly as in the CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::forecast::Forecast;
use crate::error::{Error, Result};
use crate::inference::{Bijection, PoolingFit, PosteriorDraws};
use crate::series::TimeSeries;

const W: f64 = 800.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#222222", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    /// File stem; the figure is written as `<name>.svg` and `<name>.csv`.
    pub name: String,
    pub svg: String,
    pub csv: String,
}

impl Figure {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let svg = dir.join(format!("{}.svg", self.name));
        let csv = dir.join(format!("{}.csv", self.name));
        std::fs::write(&svg, &self.svg)?;
        std::fs::write(&csv, &self.csv)?;
        Ok(vec![svg, csv])
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, a: f64, b: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * hi.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn open(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ =
        writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn axes(svg: &mut String, y: &Scale, x_lo: &str, x_hi: &str) {
    let (l, r, t, b) = (PAD, W - PAD, PAD, H - PAD);
    let _ = writeln!(svg, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, l - 4.0, b, y.lo);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, l - 4.0, t + 4.0, y.hi);
    let _ = writeln!(svg, r#"<text x="{l}" y="{}">{}</text>"#, b + 16.0, escape(x_lo));
    let _ = writeln!(svg, r#"<text x="{r}" y="{}" text-anchor="end">{}</text>"#, b + 16.0, escape(x_hi));
}

fn legend(svg: &mut String, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let y = PAD + 14.0 * i as f64;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="3" fill="{c}"/>"#, W - PAD - 150.0, y - 3.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{y}">{}</text>"#, W - PAD - 136.0, escape(n));
    }
}

/// Actual series with each model's point forecast over it.
pub fn forecast_overlay(name: &str, title: &str, actual: &TimeSeries, forecasts: &[Forecast]) -> Result<Figure> {
    let (Some(first), Some(last)) = (actual.dates().first(), actual.dates().last()) else {
        return Err(Error::Data("forecast overlay needs actual values".into()));
    };
    let mut lo = *first;
    let mut hi = *last;
    for f in forecasts {
        for r in &f.rows {
            lo = lo.min(r.date);
            hi = hi.max(r.date);
        }
    }
    let x = Scale::new([0.0, hi.days_since(&lo) as f64].into_iter(), PAD, W - PAD);
    let all = actual.values().iter().copied().chain(forecasts.iter().flat_map(|f| f.rows.iter().map(|r| r.point)));
    let y = Scale::new(all, H - PAD, PAD);

    let mut csv = String::from("date,series,value\n");
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, &y, &lo.to_string(), &hi.to_string());
    let mut line = |label: &str, pts: Vec<(crate::timebase::CalendarDate, f64)>, color: &str| {
        let coords: Vec<String> =
            pts.iter().map(|(d, v)| format!("{:.2},{:.2}", x.map(d.days_since(&lo) as f64), y.map(*v))).collect();
        let values: Vec<String> = pts.iter().map(|(_, v)| v.to_string()).collect();
        let dates: Vec<String> = pts.iter().map(|(d, _)| d.to_string()).collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-series="{}" data-dates="{}" data-values="{}" points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            escape(label),
            dates.join(" "),
            values.join(" "),
            coords.join(" ")
        );
        for (d, v) in &pts {
            let _ = writeln!(csv, "{d},{label},{v}");
        }
    };
    line("actual", actual.dates().iter().copied().zip(actual.values().iter().copied()).collect(), COLORS[0]);
    for (i, f) in forecasts.iter().enumerate() {
        line(&f.model, f.rows.iter().map(|r| (r.date, r.point)).collect(), COLORS[(i + 1) % COLORS.len()]);
    }
    let mut names = vec!["actual"];
    names.extend(forecasts.iter().map(|f| f.model.as_str()));
    legend(&mut svg, &names);
    svg.push_str("</svg>\n");
    Ok(Figure { name: name.into(), svg, csv })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub parameter: String,
    pub estimate: f64,
    pub sd: f64,
}

/// Point estimates with `estimate +/- sd` bars, one row per parameter.
pub fn interval_plot(name: &str, title: &str, rows: &[IntervalRow]) -> Figure {
    let y = Scale::new(rows.iter().flat_map(|r| [r.estimate - r.sd, r.estimate + r.sd]), H - PAD, PAD);
    let step = (W - 2.0 * PAD) / rows.len().max(1) as f64;
    let mut csv = String::from("parameter,estimate,sd,lower,upper\n");
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, &y, rows.first().map_or("", |r| &r.parameter), rows.last().map_or("", |r| &r.parameter));
    for (i, r) in rows.iter().enumerate() {
        let (lower, upper) = (r.estimate - r.sd, r.estimate + r.sd);
        let cx = PAD + step * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<g data-parameter="{}" data-estimate="{}" data-sd="{}" data-lower="{lower}" data-upper="{upper}"><line x1="{cx:.2}" x2="{cx:.2}" y1="{:.2}" y2="{:.2}" stroke="{}"/><circle cx="{cx:.2}" cy="{:.2}" r="2.5"/></g>"#,
            escape(&r.parameter),
            r.estimate,
            r.sd,
            y.map(lower),
            y.map(upper),
            COLORS[1],
            y.map(r.estimate)
        );
        let _ = writeln!(csv, "{},{},{},{lower},{upper}", r.parameter, r.estimate, r.sd);
    }
    svg.push_str("</svg>\n");
    Figure { name: name.into(), svg, csv }
}

/// Histogram of samples. Identical samples give a single zero-width bin.
pub fn histogram(name: &str, title: &str, samples: &[f64], bins: usize) -> Result<Figure> {
    if samples.is_empty() {
        return Err(Error::Contract("histogram needs at least one sample".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let edges: Vec<(f64, f64)> = if hi == lo {
        vec![(lo, hi)]
    } else {
        let w = (hi - lo) / bins.max(1) as f64;
        (0..bins.max(1))
            .map(|b| (lo + w * b as f64, if b + 1 == bins.max(1) { hi } else { lo + w * (b + 1) as f64 }))
            .collect()
    };
    let mut counts = vec![0usize; edges.len()];
    for v in samples {
        let b = if hi == lo { 0 } else { (((v - lo) / (hi - lo)) * edges.len() as f64).floor() as usize };
        counts[b.min(edges.len() - 1)] += 1;
    }
    let x = Scale::new([lo, hi].into_iter(), PAD, W - PAD);
    let y = Scale::new([0.0, counts.iter().copied().max().unwrap_or(1) as f64].into_iter(), H - PAD, PAD);
    let mut csv = String::from("bin_lower,bin_upper,count\n");
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, &y, &format!("{lo:.3}"), &format!("{hi:.3}"));
    let bar = (W - 2.0 * PAD) / edges.len() as f64;
    for ((a, b), c) in edges.iter().zip(&counts) {
        let x0 = if hi == lo { W / 2.0 - 5.0 } else { x.map(*a) };
        let width = if hi == lo { 10.0 } else { bar - 1.0 };
        let top = y.map(*c as f64);
        let _ = writeln!(
            svg,
            r#"<rect data-lower="{a}" data-upper="{b}" data-count="{c}" x="{x0:.2}" y="{top:.2}" width="{width:.2}" height="{:.2}" fill="{}"/>"#,
            (H - PAD - top).max(0.0),
            COLORS[1]
        );
        let _ = writeln!(csv, "{a},{b},{c}");
    }
    svg.push_str("</svg>\n");
    Ok(Figure { name: name.into(), svg, csv })
}

/// MAP values of every `k` and `m` with Laplace sds (model scale).
///
/// `sd` holds marginal sds in the centered coordinates of [`Bijection::new`],
/// e.g. `laplace_at(..).marginal_sd()`.
pub fn parameter_rows(fit: &PoolingFit, sd: &[f64]) -> Result<(Vec<IntervalRow>, Vec<IntervalRow>)> {
    let b = Bijection::new(&fit.spec)?;
    if sd.len() != b.dim() {
        return Err(Error::Contract(format!("got {} Laplace sds, the model has {} coordinates", sd.len(), b.dim())));
    }
    let offset = |name: &str| {
        let mut pos = 0;
        for (n, len) in b.layout() {
            if n == name {
                return pos;
            }
            pos += len;
        }
        unreachable!("layout always has k and m")
    };
    let dims = fit.spec.dims();
    let label = |d: usize, j: usize| match dims.get(d) {
        Some(dim) => format!("{}[{}]", dim.name(), j),
        None => "all".to_string(),
    };
    let rows = |name: &str, values: &Vec<Vec<f64>>| {
        let mut pos = offset(name);
        let mut out = Vec::new();
        for (d, block) in values.iter().enumerate() {
            for (j, v) in block.iter().enumerate() {
                out.push(IntervalRow { parameter: format!("{name}.{}", label(d, j)), estimate: *v, sd: sd[pos] });
                pos += 1;
            }
        }
        out
    };
    Ok((rows("k", &fit.map.params.k), rows("m", &fit.map.params.m)))
}

/// Interval plots for `k` and `m` and one theta histogram per component.
pub fn fit_figures(
    stem: &str,
    fit: &PoolingFit,
    sd: Option<&[f64]>,
    draws: Option<&PosteriorDraws>,
) -> Result<Vec<Figure>> {
    let (Some(sd), Some(draws)) = (sd, draws) else {
        return Err(Error::Contract(
            "parameter interval and theta plots need a fit with posterior draws (refit; draws need a converged MAP)"
                .into(),
        ));
    };
    let (k, m) = parameter_rows(fit, sd)?;
    let label = fit.spec.label();
    let mut out = vec![
        interval_plot(&format!("{stem}_k"), &format!("{label}: growth rates k (MAP +/- Laplace sd)"), &k),
        interval_plot(&format!("{stem}_m"), &format!("{label}: offsets m (MAP +/- Laplace sd)"), &m),
    ];
    let dims = fit.spec.dims();
    for d in 0..fit.map.params.theta.len() {
        let name = dims.get(d).map_or("all", |x| x.name());
        let samples: Vec<f64> = draws.params.iter().map(|p| p.theta[d]).collect();
        out.push(histogram(
            &format!("{stem}_theta_{name}"),
            &format!("{label}: theta[{name}] posterior draws"),
            &samples,
            30,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timebase::{date_range, parse_date};

    fn attr_values<'a>(svg: &'a str, attr: &str) -> Vec<&'a str> {
        let key = format!("{attr}=\"");
        svg.match_indices(&key).map(|(i, _)| &svg[i + key.len()..]).map(|s| &s[..s.find('"').unwrap()]).collect()
    }

    #[test]
    fn overlay_svg_and_csv_hold_the_same_numbers() {
        let d = date_range(parse_date("2018-01-01").unwrap(), parse_date("2018-01-04").unwrap());
        let actual = TimeSeries::new("a", d.clone(), vec![1.0, 2.5, 3.0, 0.125]).unwrap();
        let f = Forecast {
            model: "m".into(),
            rows: d
                .iter()
                .map(|x| super::super::forecast::ForecastRow { date: *x, point: 2.0, lower: 1.0, upper: 3.0 })
                .collect(),
        };
        let fig = forecast_overlay("o", "t", &actual, &[f]).unwrap();
        let from_svg: Vec<String> =
            attr_values(&fig.svg, "data-values").iter().flat_map(|s| s.split(' ')).map(String::from).collect();
        let from_csv: Vec<String> =
            fig.csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
        assert_eq!(from_svg, from_csv);
    }

    #[test]
    fn point_mass_histogram() {
        let fig = histogram("h", "theta", &[1.0; 50], 30).unwrap();
        assert_eq!(fig.csv, "bin_lower,bin_upper,count\n1,1,50\n");
        assert_eq!(attr_values(&fig.svg, "data-count"), vec!["50"]);
    }

    #[test]
    fn histogram_counts_every_sample() {
        let s: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let fig = histogram("h", "x", &s, 17).unwrap();
        let total: usize =
            fig.csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(total, 1000);
    }

    #[test]
    fn missing_draws_are_explained() {
        let err = fit_figures("x", &dummy_fit(), None, None).unwrap_err();
        assert!(matches!(err, Error::Contract(ref m) if m.contains("draws")));
    }

    fn dummy_fit() -> PoolingFit {
        use crate::model::{ModelSpec, ParameterSet, StandardizationInfo};
        let spec = ModelSpec::complete();
        let map = crate::inference::MapResult {
            params: ParameterSet::complete(0.0, 0.0, 1.0),
            log_post: 0.0,
            objective: 0.0,
            unconstrained_opt: vec![0.0; 3],
            iterations: 0,
            converged: true,
            grad_norm: 0.0,
            restart: 0,
            parameterization: Default::default(),
            trace: Vec::new(),
        };
        PoolingFit { spec, info: StandardizationInfo::identity(parse_date("2018-01-01").unwrap()), map }
    }
}
