use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use hiercast_core::io::RunConfig;
use hiercast_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "hiercast", version, about = "Hierarchical seasonality forecasting for daily series")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each overrides the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input `date,value` CSV; repeat for several series. Replaces `data` from the config.
    #[arg(long = "data", global = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long = "out", global = true)]
    pub out: Option<PathBuf>,
    /// Model name, e.g. `complete`, `partial-week`, `mixed-week+month`, `fourier-week`.
    /// Repeat for several. A bare `partial`, `mixed` or `fourier` takes its dims from `--dims`.
    #[arg(long = "model", global = true)]
    pub models: Vec<String>,
    /// Seasonality dims for bare model kinds, e.g. `week`, `month` or `week+month`.
    #[arg(long, global = true)]
    pub dims: Option<String>,
    /// Number of evaluation folds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// First day of the first test window (YYYY-MM-DD).
    #[arg(long, global = true)]
    pub first_test_start: Option<String>,
    /// Days per test window and days ahead for `forecast`.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Posterior draws per fit.
    #[arg(long, global = true)]
    pub draws: Option<usize>,
    /// Run evaluation folds on all cores.
    #[arg(long, global = true)]
    pub parallel: bool,
    /// Set any config field, e.g. `--set map.restarts=1` or `--set priors.noise_sd_scale=1.0`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit every configured model on every input series.
    Fit,
    /// Point forecasts and 10%/90% predictive quantiles for the days after the data.
    Forecast {
        /// Use saved fits instead of fitting the configured models.
        #[arg(long = "fit")]
        fits: Vec<PathBuf>,
    },
    /// Expanding-window evaluation of the configured models.
    Evaluate,
    /// Write a synthetic series from a preset or a spec file.
    Simulate {
        /// `delivery-like`, `restocking-like` or `shipment-like`.
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<String>,
        /// TOML synthetic spec.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Score configured models and imported point forecasts on the same folds.
    Compare {
        /// `NAME=PATH` or `DATASET:NAME=PATH`; the CSV has header `date,value`.
        #[arg(long = "external", value_name = "SPEC")]
        externals: Vec<String>,
    },
    /// SVG figures with sibling CSVs from saved fits and evaluation reports.
    Plot {
        /// Fit JSON written by `fit`: parameter intervals and theta histograms.
        #[arg(long = "fit")]
        fits: Vec<PathBuf>,
        /// `report.json` written by `evaluate` or `compare`: forecast overlays.
        #[arg(long = "report")]
        reports: Vec<PathBuf>,
    },
}

impl Cli {
    pub fn name(&self) -> &'static str {
        match self.command {
            Command::Fit => "fit",
            Command::Forecast { .. } => "forecast",
            Command::Evaluate => "evaluate",
            Command::Simulate { .. } => "simulate",
            Command::Compare { .. } => "compare",
            Command::Plot { .. } => "plot",
        }
    }
}

fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last =
        parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty key in --set {key}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config(format!("--set {key}: '{p}' is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn expand_model(name: &str, dims: Option<&str>) -> Result<String> {
    match (name, dims) {
        ("partial" | "mixed" | "fourier", Some(d)) => Ok(format!("{name}-{d}")),
        ("partial" | "mixed" | "fourier", None) => Err(Error::Config(format!("model '{name}' needs --dims"))),
        _ => Ok(name.to_string()),
    }
}

impl Common {
    /// Config file, then `--set` entries, then the typed flags.
    pub fn config(&self) -> Result<RunConfig> {
        let mut table = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?
                .parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("invalid config {}: {}", path.display(), e.message())))?,
            None => toml::Table::new(),
        };
        for s in &self.set {
            let (k, v) =
                s.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let mut cfg = RunConfig::from_toml(&table.to_string())?;
        if !self.data.is_empty() {
            cfg.data = self.data.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if !self.models.is_empty() {
            cfg.models = self.models.iter().map(|m| expand_model(m, self.dims.as_deref())).collect::<Result<_>>()?;
        } else if let Some(d) = &self.dims {
            cfg.models = cfg.models.iter().map(|m| expand_model(m, Some(d))).collect::<Result<_>>()?;
        }
        if let Some(n) = self.folds {
            cfg.folds.n_folds = n;
        }
        if let Some(d) = &self.first_test_start {
            cfg.folds.first_test_start = hiercast_core::timebase::parse_date(d)?;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
            cfg.folds.horizon = h;
        }
        if let Some(d) = self.draws {
            cfg.draws = d;
        }
        if self.parallel {
            cfg.parallel = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
