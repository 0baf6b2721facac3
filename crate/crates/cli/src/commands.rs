use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use hiercast_core::baselines::import_external_forecast;
use hiercast_core::datagen::{preset, synthesize, SynthSpec};
use hiercast_core::evaluation::{render_tables, report_csv, run_benchmark, EvaluationReport, ModelEntry};
use hiercast_core::io::{
    fit_entry, fit_figures, forecast_overlay, load_csv, write_csv, write_forecast, FitArtifact, Fitted, Forecast,
    ForecastRow, RunConfig, RunManifest,
};
use hiercast_core::{Error, Result, TimeSeries};

use crate::args::{Cli, Command};

/// File-name-safe form of a dataset or model name.
pub fn stem(parts: &[&str]) -> String {
    parts
        .iter()
        .map(|p| p.chars().map(|c| if c.is_ascii_alphanumeric() || "-_+".contains(c) { c } else { '_' }).collect())
        .collect::<Vec<String>>()
        .join(".")
}

struct Run {
    cfg: RunConfig,
    manifest: RunManifest,
}

impl Run {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out(name);
        std::fs::write(&path, contents)?;
        self.manifest.add_outputs([path]);
        Ok(())
    }

    fn series(&mut self) -> Result<Vec<TimeSeries>> {
        if self.cfg.data.is_empty() {
            return Err(Error::Config("no input data (pass --data or set `data` in the config)".into()));
        }
        let paths = self.cfg.data.clone();
        paths
            .iter()
            .map(|p| {
                self.manifest.add_input(p)?;
                load_csv(p)
            })
            .collect()
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.common.config()?;
    let mut manifest = RunManifest::start(cli.name(), &cfg);
    if let Some(c) = &cli.common.config {
        manifest.add_input(c)?;
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut run = Run { cfg, manifest };
    match &cli.command {
        Command::Fit => fit(&mut run)?,
        Command::Forecast { fits } => forecast(&mut run, fits)?,
        Command::Evaluate => evaluate(&mut run, &[], "report")?,
        Command::Simulate { preset, spec } => simulate(&mut run, preset.as_deref(), spec.as_deref())?,
        Command::Compare { externals } => evaluate(&mut run, externals, "compare")?,
        Command::Plot { fits, reports } => plot(&mut run, fits, reports)?,
    }
    let dir = run.cfg.output_dir.clone();
    run.manifest.finish(&dir)?;
    Ok(())
}

fn fit_all(run: &mut Run) -> Result<Vec<FitArtifact>> {
    let entries = run.cfg.model_entries()?;
    let mut out = Vec::new();
    for series in run.series()? {
        for entry in &entries {
            log::info!("fitting {} on {}", entry.name, series.name());
            let artifact = fit_entry(entry, &series, &run.cfg)?;
            if !artifact.converged() {
                log::warn!("{} on {}: optimizer did not converge", entry.name, series.name());
            }
            out.push(artifact);
        }
    }
    Ok(out)
}

fn fit(run: &mut Run) -> Result<()> {
    for a in fit_all(run)? {
        let s = stem(&[&a.dataset, &a.model]);
        let path = run.out(&format!("{s}.fit.json"));
        a.save(&path)?;
        run.manifest.add_outputs([path]);
        run.write(&format!("{s}.trace.csv"), &a.trace_csv())?;
    }
    Ok(())
}

fn forecast(run: &mut Run, fits: &[PathBuf]) -> Result<()> {
    let artifacts = if fits.is_empty() {
        fit_all(run)?
    } else {
        fits.iter()
            .map(|p| {
                run.manifest.add_input(p)?;
                FitArtifact::load(p)
            })
            .collect::<Result<Vec<_>>>()?
    };
    for a in artifacts {
        let f = a.forecast_ahead(run.cfg.horizon)?;
        let path = run.out(&format!("{}.forecast.csv", stem(&[&a.dataset, &a.model])));
        write_forecast(&path, &f)?;
        run.manifest.add_outputs([path]);
    }
    Ok(())
}

/// `NAME=PATH` or `DATASET:NAME=PATH`.
fn parse_external(text: &str) -> Result<(Option<String>, String, PathBuf)> {
    let (lhs, path) =
        text.split_once('=').ok_or_else(|| Error::Config(format!("--external expects NAME=PATH, got '{text}'")))?;
    let (dataset, name) = match lhs.split_once(':') {
        Some((d, n)) => (Some(d.to_string()), n.to_string()),
        None => (None, lhs.to_string()),
    };
    if name.is_empty() {
        return Err(Error::Config(format!("--external '{text}' has an empty name")));
    }
    Ok((dataset, name, PathBuf::from(path)))
}

fn forecasts_csv(reports: &[EvaluationReport]) -> String {
    let mut out = String::from("dataset,model,fold,date,actual,forecast\n");
    for r in reports {
        for m in &r.models {
            for f in &m.folds {
                let Some(fc) = &f.forecast else { continue };
                for ((d, a), v) in f.dates.iter().zip(&f.actual).zip(fc) {
                    out.push_str(&format!("{},{},{},{d},{a},{v}\n", r.dataset, m.name, f.fold));
                }
            }
        }
    }
    out
}

fn evaluate(run: &mut Run, externals: &[String], prefix: &str) -> Result<()> {
    let externals: Vec<(Option<String>, String, PathBuf)> =
        externals.iter().map(|e| parse_external(e)).collect::<Result<_>>()?;
    let mut settings = run.cfg.benchmark_settings();
    if prefix == "compare" {
        settings.loo = false;
    }
    let entries = run.cfg.model_entries()?;
    let mut reports = Vec::new();
    for series in run.series()? {
        let mut models = entries.clone();
        for (dataset, name, path) in &externals {
            if dataset.as_deref().is_none_or(|d| d == series.name()) {
                run.manifest.add_input(path)?;
                models.push(ModelEntry::external(import_external_forecast(path, name)?));
            }
        }
        let plan = run.cfg.folds.plan(series.dates())?;
        log::info!("{}: {} model(s) x {} fold(s)", series.name(), models.len(), plan.folds.len());
        reports.push(run_benchmark(&series, &models, &plan, &settings));
    }
    for r in &reports {
        for m in &r.models {
            for e in &m.errors {
                log::warn!("{} / {}: {e}", r.dataset, m.name);
            }
        }
    }
    run.write(&format!("{prefix}.json"), &serde_json::to_string_pretty(&reports)?)?;
    run.write(&format!("{prefix}.csv"), &report_csv(&reports)?)?;
    run.write(&format!("{prefix}_forecasts.csv"), &forecasts_csv(&reports))?;
    let tables = render_tables(&reports);
    run.write(&format!("{prefix}_tables.txt"), &tables)?;
    print!("{tables}");
    Ok(())
}

fn simulate(run: &mut Run, name: Option<&str>, spec_path: Option<&Path>) -> Result<()> {
    let spec = match (name, spec_path) {
        (Some(n), _) => preset(n, run.cfg.seed)?,
        (None, Some(p)) => {
            run.manifest.add_input(p)?;
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read spec {}: {e}", p.display())))?;
            let spec: SynthSpec =
                toml::from_str(&text).map_err(|e| Error::Config(format!("invalid spec: {}", e.message())))?;
            match run.cfg.seed {
                0 => spec,
                s => spec.with_seed(s),
            }
        }
        (None, None) => return Err(Error::Config("simulate needs --preset or --spec".into())),
    };
    let synth = synthesize(&spec)?;
    let s = stem(&[&spec.name]);
    let path = run.out(&format!("{s}.csv"));
    write_csv(&path, &synth.series)?;
    run.manifest.add_outputs([path]);
    let spec_text = toml::to_string(&spec).map_err(|e| Error::Config(format!("cannot serialize spec: {e}")))?;
    run.write(&format!("{s}.spec.toml"), &spec_text)?;
    Ok(())
}

/// Fold forecasts of one model laid end to end; `None` if any fold has none.
fn stitched(report: &EvaluationReport, model: usize) -> Option<Forecast> {
    let m = &report.models[model];
    let mut rows = Vec::new();
    for f in &m.folds {
        for (d, v) in f.dates.iter().zip(f.forecast.as_ref()?) {
            rows.push(ForecastRow { date: *d, point: *v, lower: *v, upper: *v });
        }
    }
    Some(Forecast { model: m.name.clone(), rows })
}

fn plot(run: &mut Run, fits: &[PathBuf], reports: &[PathBuf]) -> Result<()> {
    if fits.is_empty() && reports.is_empty() {
        return Err(Error::Config("plot needs --fit and/or --report files".into()));
    }
    let dir = run.cfg.output_dir.clone();
    for p in fits {
        run.manifest.add_input(p)?;
        let a = FitArtifact::load(p)?;
        let Fitted::Pooling { fit, draws, laplace_sd } = &a.fitted else {
            return Err(Error::Contract(format!(
                "{}: parameter and theta plots are defined for pooling models only",
                p.display()
            )));
        };
        if let Some(why) = &a.draw_error {
            log::warn!("{}: {why}", p.display());
        }
        for fig in fit_figures(&stem(&[&a.dataset, &a.model]), fit, laplace_sd.as_deref(), draws.as_ref())? {
            run.manifest.add_outputs(fig.write(&dir)?);
        }
    }
    for p in reports {
        run.manifest.add_input(p)?;
        let text = std::fs::read_to_string(p)?;
        let parsed: Vec<EvaluationReport> = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{} is not an evaluation report: {e}", p.display())))?;
        for r in &parsed {
            let Some(first) = r.models.first() else { continue };
            let mut seen = BTreeSet::new();
            let (mut dates, mut values) = (Vec::new(), Vec::new());
            for f in &first.folds {
                for (d, a) in f.dates.iter().zip(&f.actual) {
                    if seen.insert(*d) {
                        dates.push(*d);
                        values.push(*a);
                    }
                }
            }
            let actual = TimeSeries::new(r.dataset.clone(), dates, values)?;
            let forecasts: Vec<Forecast> = (0..r.models.len()).filter_map(|i| stitched(r, i)).collect();
            let name = format!("{}.forecast", stem(&[&r.dataset]));
            let fig = forecast_overlay(&name, &format!("{}: actual vs forecasts", r.dataset), &actual, &forecasts)?;
            run.manifest.add_outputs(fig.write(&dir)?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(stem(&["a b", "fourier(7x3)"]), "a_b.fourier_7x3_");
        assert_eq!(stem(&["shipment-like", "mixed-week+month"]), "shipment-like.mixed-week+month");
    }

    #[test]
    fn external_specs() {
        assert_eq!(parse_external("sarima=f.csv").unwrap(), (None, "sarima".into(), "f.csv".into()));
        assert_eq!(parse_external("d:s=x/y.csv").unwrap(), (Some("d".into()), "s".into(), "x/y.csv".into()));
        assert!(parse_external("nope").is_err());
        assert!(parse_external("=f.csv").is_err());
    }
}
