use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{FourierConfig, FourierOptions};
use crate::error::{Error, Result};
use crate::evaluation::{BenchmarkSettings, FoldSettings, ModelEntry, ZeroPolicy};
use crate::inference::MapOptions;
use crate::model::{ModelSpec, PriorConstants};
use crate::timebase::SeasonalityKind;

/// Everything a CLI run needs. Every field has a default, so a config file
/// only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Input series CSVs (`date,value`).
    pub data: Vec<PathBuf>,
    /// Model names, see [`parse_model`]. `fit` and `forecast` use the first.
    pub models: Vec<String>,
    pub priors: PriorConstants,
    pub map: MapOptions,
    pub folds: FoldSettings,
    pub draws: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub zero_policy: ZeroPolicy,
    /// Forecast horizon in days for `forecast`.
    pub horizon: usize,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: Vec::new(),
            models: ["complete", "partial-week", "partial-month", "mixed-week+month"].map(String::from).to_vec(),
            priors: PriorConstants::default(),
            map: MapOptions::default(),
            folds: FoldSettings::default(),
            draws: 1000,
            seed: 0,
            output_dir: PathBuf::from("out"),
            zero_policy: ZeroPolicy::Error,
            horizon: 30,
            parallel: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Checks values and that every data file exists.
    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        if self.draws == 0 {
            return Err(Error::Config("draws must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1 day".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".into()));
        }
        for m in &self.models {
            parse_model(m)?;
        }
        for p in &self.data {
            if !p.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Configured models with the configured priors applied.
    pub fn model_entries(&self) -> Result<Vec<ModelEntry>> {
        self.models.iter().map(|m| self.model_entry(m)).collect()
    }

    pub fn model_entry(&self, name: &str) -> Result<ModelEntry> {
        let mut entry = parse_model(name)?;
        if let crate::evaluation::ModelEntryKind::Pooling(spec) = &mut entry.kind {
            spec.priors = self.priors;
        }
        Ok(entry)
    }

    pub fn map_options(&self) -> MapOptions {
        self.map.with_seed(self.seed)
    }

    pub fn fourier_options(&self) -> FourierOptions {
        FourierOptions { priors: self.priors, map: self.map_options(), ..FourierOptions::default() }
    }

    pub fn benchmark_settings(&self) -> BenchmarkSettings {
        BenchmarkSettings {
            map: self.map,
            fourier: self.fourier_options(),
            n_draws: self.draws,
            seed: self.seed,
            parallel: self.parallel,
            zero_policy: self.zero_policy,
            loo: true,
        }
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config is always serializable");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn dims_from(text: &str) -> Result<Vec<SeasonalityKind>> {
    text.split('+')
        .map(|d| match d {
            "week" => Ok(SeasonalityKind::DayOfWeek),
            "month" => Ok(SeasonalityKind::DayOfMonth),
            other => Err(Error::Config(format!("unknown seasonality '{other}' (expected week or month)"))),
        })
        .collect()
}

fn fourier_terms(text: &str) -> Result<FourierConfig> {
    let mut terms = Vec::new();
    for part in text.split('+') {
        let (p, n) = part
            .split_once('x')
            .ok_or_else(|| Error::Config(format!("Fourier term '{part}' should look like PERIODxORDER, e.g. 7x3")))?;
        let period: f64 = p.parse().map_err(|_| Error::Config(format!("bad Fourier period '{p}'")))?;
        let order: usize = n.parse().map_err(|_| Error::Config(format!("bad Fourier order '{n}'")))?;
        terms.push((period, order));
    }
    FourierConfig::new(&terms)
}

/// Parses a model name.
///
/// * `complete`
/// * `partial-week`, `partial-month`
/// * `mixed-week+month` (any `+`-joined list of `week`/`month`)
/// * `fourier-week` (7x3), `fourier-month` (30.4375x5), `fourier-week+month`
/// * `fourier(7x3+30.4375x5)` for explicit terms
///
/// The entry is named after the text as given.
pub fn parse_model(text: &str) -> Result<ModelEntry> {
    let t = text.trim();
    let entry = if t == "complete" {
        ModelEntry::pooling(ModelSpec::complete())
    } else if let Some(rest) = t.strip_prefix("partial-") {
        match dims_from(rest)?.as_slice() {
            [d] => ModelEntry::pooling(ModelSpec::partial(*d)),
            _ => return Err(Error::Config(format!("partial pooling takes one seasonality, got '{rest}'"))),
        }
    } else if let Some(rest) = t.strip_prefix("mixed-") {
        ModelEntry::pooling(ModelSpec::mixed(dims_from(rest)?)?)
    } else if let Some(inner) = t.strip_prefix("fourier(").and_then(|r| r.strip_suffix(')')) {
        ModelEntry::fourier(fourier_terms(inner)?)
    } else if let Some(rest) = t.strip_prefix("fourier-") {
        let mut terms = Vec::new();
        for d in dims_from(rest)? {
            terms.extend(match d {
                SeasonalityKind::DayOfWeek => FourierConfig::weekly().terms,
                SeasonalityKind::DayOfMonth => FourierConfig::monthly().terms,
            });
        }
        ModelEntry::fourier(FourierConfig { terms })
    } else {
        return Err(Error::Config(format!(
            "unknown model '{t}' (expected complete, partial-DIM, mixed-DIM+DIM, fourier-DIM or fourier(PxN+..))"
        )));
    };
    Ok(entry.named(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::ModelEntryKind;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::from_toml("seed = 7\ndraws = 50\n[folds]\nn_folds = 2\n").unwrap();
        assert_eq!((cfg.seed, cfg.draws, cfg.folds.n_folds, cfg.folds.horizon), (7, 50, 2, 30));
        assert_ne!(cfg.hash(), RunConfig::default().hash());
        assert!(RunConfig::from_toml("sede = 7").is_err());
    }

    #[test]
    fn missing_data_file_fails_validation() {
        let cfg = RunConfig { data: vec!["/nonexistent/x.csv".into()], ..RunConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(ref m)) if m.contains("does not exist")));
    }

    #[test]
    fn model_names() {
        let m = parse_model("mixed-week+month").unwrap();
        assert_eq!(m.name, "mixed-week+month");
        assert!(matches!(m.kind, ModelEntryKind::Pooling(ref s) if s.dims().len() == 2));
        let f = parse_model("fourier-week+month").unwrap();
        assert!(matches!(f.kind, ModelEntryKind::Fourier(ref c) if c.n_features() == 16));
        let g = parse_model("fourier(7x3)").unwrap();
        assert!(matches!(g.kind, ModelEntryKind::Fourier(ref c) if c.n_features() == 6));
        for bad in ["partial-week+month", "mixed-day", "fourier(7)", "arima"] {
            assert!(parse_model(bad).is_err(), "{bad}");
        }
    }
}
