use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{Fold, FoldPlan};
use super::metrics::{loglik_matrix, lpd_from_loglik, mape, ZeroPolicy};
use super::psis::{psis_loo, ParetoDiagnostic};
use crate::baselines::{
    fit_fourier, fourier_draws, predict_fourier, ExternalForecast, FourierConfig, FourierData, FourierOptions,
    FourierParams,
};
use crate::error::{Error, Result};
use crate::inference::{laplace_draws, map_fit, MapOptions};
use crate::model::density::normal_lpdf;
use crate::model::{destandardize, predict_mean, ModelData, ModelSpec};
use crate::rng::derive_seed;
use crate::series::TimeSeries;
use crate::timebase::CalendarDate;

#[derive(Debug, Clone)]
pub enum ModelEntryKind {
    Pooling(ModelSpec),
    Fourier(FourierConfig),
    External(ExternalForecast),
}

/// A named column of the comparison table.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub name: String,
    pub kind: ModelEntryKind,
}

impl ModelEntry {
    pub fn pooling(spec: ModelSpec) -> Self {
        Self { name: spec.label(), kind: ModelEntryKind::Pooling(spec) }
    }

    pub fn fourier(config: FourierConfig) -> Self {
        Self { name: "fourier".into(), kind: ModelEntryKind::Fourier(config) }
    }

    pub fn external(forecast: ExternalForecast) -> Self {
        Self { name: forecast.name().to_string(), kind: ModelEntryKind::External(forecast) }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn is_probabilistic(&self) -> bool {
        !matches!(self.kind, ModelEntryKind::External(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSettings {
    pub map: MapOptions,
    /// Fourier priors and standardization; its optimizer options are taken from `map`.
    pub fourier: FourierOptions,
    pub n_draws: usize,
    pub seed: u64,
    pub parallel: bool,
    pub zero_policy: ZeroPolicy,
    /// PSIS-LOO on the final fold's training fit.
    pub loo: bool,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            map: MapOptions::default(),
            fourier: FourierOptions::default(),
            n_draws: 1000,
            seed: 0,
            parallel: false,
            zero_policy: ZeroPolicy::Error,
            loo: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 1-based fold number.
    pub fold: usize,
    pub test_start: CalendarDate,
    pub test_end: CalendarDate,
    pub dates: Vec<CalendarDate>,
    pub actual: Vec<f64>,
    pub forecast: Option<Vec<f64>>,
    pub mape: Option<f64>,
    pub test_lpd: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooSummary {
    pub elpd_loo: f64,
    pub per_point: Vec<f64>,
    pub pareto: ParetoDiagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub folds: Vec<FoldResult>,
    /// Mean of per-fold MAPEs; absent when any fold failed.
    pub mean_mape: Option<f64>,
    /// Test log predictive density summed over folds; absent when any fold lacks it.
    pub test_lpd: Option<f64>,
    pub loo: Option<LooSummary>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub plan: FoldPlan,
    pub models: Vec<ModelReport>,
}

impl EvaluationReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn mean_mape(&self, name: &str) -> Option<f64> {
        self.model(name).and_then(|m| m.mean_mape)
    }
}

fn describe(e: &Error) -> String {
    format!("{}: {e}", e.category())
}

struct Cell {
    forecast: Option<Vec<f64>>,
    mape: Option<f64>,
    lpd: Option<f64>,
    loo: Option<LooSummary>,
    errors: Vec<String>,
}

impl Cell {
    fn failed(e: &Error) -> Self {
        Self { forecast: None, mape: None, lpd: None, loo: None, errors: vec![describe(e)] }
    }
}

fn score_point(cell: &mut Cell, test: &TimeSeries, forecast: Vec<f64>, zero: ZeroPolicy) {
    match mape(test.values(), &forecast, zero) {
        Ok(v) => cell.mape = Some(v),
        Err(e) => cell.errors.push(describe(&e)),
    }
    cell.forecast = Some(forecast);
}

fn loo_summary(loglik: &[Vec<f64>]) -> Result<LooSummary> {
    let r = psis_loo(loglik)?;
    Ok(LooSummary { elpd_loo: r.elpd_loo, per_point: r.per_point, pareto: r.pareto })
}

fn pooling_cell(
    spec: &ModelSpec,
    train: &TimeSeries,
    test: &TimeSeries,
    settings: &BenchmarkSettings,
    seed: u64,
    want_loo: bool,
) -> Cell {
    let fit = match map_fit(train, spec, &settings.map.with_seed(seed)) {
        Ok(f) => f,
        Err(e) => return Cell::failed(&e),
    };
    let mut cell = Cell { forecast: None, mape: None, lpd: None, loo: None, errors: Vec::new() };
    let forecast = ModelData::for_dates(test.dates(), None, spec, &fit.info)
        .and_then(|d| predict_mean(&fit.map.params, &d.t, d.pooling.as_ref(), spec))
        .map(|mu| destandardize(&mu, &fit.info));
    match forecast {
        Ok(f) => score_point(&mut cell, test, f, settings.zero_policy),
        Err(e) => cell.errors.push(describe(&e)),
    }
    let probabilistic = (|| -> Result<(f64, Option<LooSummary>)> {
        let (train_data, _) = ModelData::prepare(train, spec)?;
        let draws = laplace_draws(&fit.map, &train_data, spec, settings.n_draws, seed)?;
        let test_data = ModelData::for_dates(test.dates(), Some(test.values()), spec, &fit.info)?;
        let lpd = lpd_from_loglik(&loglik_matrix(&draws, &test_data, spec)?, fit.info.y_sd)?.total;
        let loo = if want_loo { Some(loo_summary(&loglik_matrix(&draws, &train_data, spec)?)?) } else { None };
        Ok((lpd, loo))
    })();
    match probabilistic {
        Ok((lpd, loo)) => {
            cell.lpd = Some(lpd);
            cell.loo = loo;
        }
        Err(e) => cell.errors.push(describe(&e)),
    }
    cell
}

fn fourier_loglik(draws: &[FourierParams], data: &FourierData) -> Vec<Vec<f64>> {
    draws
        .iter()
        .map(|p| {
            let mu = p.mean(&data.t, &data.x);
            data.y.iter().zip(&mu).map(|(y, m)| normal_lpdf(*y, *m, p.sigma_obs)).collect()
        })
        .collect()
}

fn fourier_cell(
    config: &FourierConfig,
    train: &TimeSeries,
    test: &TimeSeries,
    settings: &BenchmarkSettings,
    seed: u64,
    want_loo: bool,
) -> Cell {
    let opts = FourierOptions { map: settings.map.with_seed(seed), ..settings.fourier };
    let fit = match fit_fourier(train, config, &opts) {
        Ok(f) => f,
        Err(e) => return Cell::failed(&e),
    };
    let mut cell = Cell { forecast: None, mape: None, lpd: None, loo: None, errors: Vec::new() };
    match predict_fourier(&fit.params, test.dates(), config, &fit.info) {
        Ok(f) => score_point(&mut cell, test, f, settings.zero_policy),
        Err(e) => cell.errors.push(describe(&e)),
    }
    let probabilistic = (|| -> Result<(f64, Option<LooSummary>)> {
        let draws = fourier_draws(&fit, train, settings.n_draws, seed)?;
        let test_data = FourierData::for_dates(test.dates(), Some(test.values()), config, &fit.info)?;
        let lpd = lpd_from_loglik(&fourier_loglik(&draws, &test_data), fit.info.y_sd)?.total;
        let loo = if want_loo {
            let train_data = FourierData::for_dates(train.dates(), Some(train.values()), config, &fit.info)?;
            Some(loo_summary(&fourier_loglik(&draws, &train_data))?)
        } else {
            None
        };
        Ok((lpd, loo))
    })();
    match probabilistic {
        Ok((lpd, loo)) => {
            cell.lpd = Some(lpd);
            cell.loo = loo;
        }
        Err(e) => cell.errors.push(describe(&e)),
    }
    cell
}

fn run_cell(
    entry: &ModelEntry,
    plan: &FoldPlan,
    fold: &Fold,
    data: &TimeSeries,
    settings: &BenchmarkSettings,
    seed: u64,
) -> (Option<TimeSeries>, Cell) {
    let (train, test) = match plan.split(data, fold) {
        Ok(s) => s,
        Err(e) => return (None, Cell::failed(&e)),
    };
    let want_loo = settings.loo && fold.index + 1 == plan.folds.len();
    let cell = match &entry.kind {
        ModelEntryKind::Pooling(spec) => pooling_cell(spec, &train, &test, settings, seed, want_loo),
        ModelEntryKind::Fourier(cfg) => fourier_cell(cfg, &train, &test, settings, seed, want_loo),
        ModelEntryKind::External(ext) => {
            let mut cell = Cell { forecast: None, mape: None, lpd: None, loo: None, errors: Vec::new() };
            match ext.align_to(test.dates()) {
                Ok(f) => score_point(&mut cell, &test, f, settings.zero_policy),
                Err(e) => cell.errors.push(describe(&e)),
            }
            cell
        }
    };
    (Some(test), cell)
}

/// Fits every model on every fold's training window and scores the fold.
///
/// Failures are recorded in the affected cell. Each cell draws its seed from
/// `(settings.seed, model index, fold index)`, so results do not depend on
/// execution order or on `settings.parallel`.
pub fn run_benchmark(
    data: &TimeSeries,
    models: &[ModelEntry],
    plan: &FoldPlan,
    settings: &BenchmarkSettings,
) -> EvaluationReport {
    let cells: Vec<(usize, usize)> =
        (0..models.len()).flat_map(|m| (0..plan.folds.len()).map(move |f| (m, f))).collect();
    let work = |&(m, f): &(usize, usize)| {
        let seed = derive_seed(settings.seed, &[m as u64, f as u64]);
        log::debug!("{}: fold {} of model {}", data.name(), f + 1, models[m].name);
        run_cell(&models[m], plan, &plan.folds[f], data, settings, seed)
    };
    let results: Vec<(Option<TimeSeries>, Cell)> =
        if settings.parallel { cells.par_iter().map(work).collect() } else { cells.iter().map(work).collect() };

    let mut results = results.into_iter();
    let models = models
        .iter()
        .map(|entry| {
            let mut folds = Vec::new();
            let mut loo = None;
            let mut errors = Vec::new();
            for fold in &plan.folds {
                let (test, cell) = results.next().expect("one result per cell");
                if let Some(l) = cell.loo {
                    loo = Some(l);
                }
                for e in &cell.errors {
                    errors.push(format!("fold {}: {e}", fold.index + 1));
                }
                folds.push(FoldResult {
                    fold: fold.index + 1,
                    test_start: fold.test_start,
                    test_end: fold.test_end_inclusive,
                    dates: test.as_ref().map(|t| t.dates().to_vec()).unwrap_or_default(),
                    actual: test.as_ref().map(|t| t.values().to_vec()).unwrap_or_default(),
                    forecast: cell.forecast,
                    mape: cell.mape,
                    test_lpd: cell.lpd,
                    errors: cell.errors,
                });
            }
            let mapes: Option<Vec<f64>> = folds.iter().map(|f| f.mape).collect();
            let mean_mape = mapes.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64);
            let test_lpd = if entry.is_probabilistic() {
                folds.iter().map(|f| f.test_lpd).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum())
            } else {
                None
            };
            ModelReport { name: entry.name.clone(), folds, mean_mape, test_lpd, loo, errors }
        })
        .collect();
    EvaluationReport { dataset: data.name().to_string(), plan: plan.clone(), models }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format rows `dataset,model,fold,metric,value`. Aggregates use fold `all`.
pub fn report_csv(reports: &[EvaluationReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "model", "fold", "metric", "value"])?;
    for r in reports {
        for m in &r.models {
            for f in &m.folds {
                let fold = f.fold.to_string();
                w.write_record([&r.dataset, &m.name, &fold, "mape", &opt(f.mape)])?;
                if f.test_lpd.is_some() {
                    w.write_record([&r.dataset, &m.name, &fold, "test_lpd", &opt(f.test_lpd)])?;
                }
                for e in &f.errors {
                    w.write_record([r.dataset.as_str(), &m.name, &fold, "error", e])?;
                }
            }
            w.write_record([&r.dataset, &m.name, "all", "mean_mape", &opt(m.mean_mape)])?;
            if m.test_lpd.is_some() {
                w.write_record([&r.dataset, &m.name, "all", "test_lpd", &opt(m.test_lpd)])?;
            }
            if let Some(l) = &m.loo {
                w.write_record([&r.dataset, &m.name, "all", "loo_elpd", &l.elpd_loo.to_string()])?;
                w.write_record([&r.dataset, &m.name, "all", "pareto_k_max", &l.pareto.max_k().to_string()])?;
                w.write_record([&r.dataset, &m.name, "all", "pareto_k_flagged", &l.pareto.n_flagged().to_string()])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn table(title: &str, reports: &[EvaluationReport], cell: impl Fn(&ModelReport) -> Option<f64>) -> String {
    let mut columns: Vec<String> = Vec::new();
    for r in reports {
        for m in &r.models {
            if !columns.contains(&m.name) {
                columns.push(m.name.clone());
            }
        }
    }
    let mut rows: Vec<Vec<String>> = vec![std::iter::once(title.to_string()).chain(columns.iter().cloned()).collect()];
    for r in reports {
        let mut row = vec![r.dataset.clone()];
        for c in &columns {
            row.push(match r.model(c) {
                None => "-".into(),
                Some(m) => cell(m).map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".into()),
            });
        }
        rows.push(row);
    }
    let widths: Vec<usize> =
        (0..=columns.len()).map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, s)| if i == 0 { format!("{s:<w$}", w = widths[i]) } else { format!("{s:>w$}", w = widths[i]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Aligned text tables with datasets as rows and models as columns: mean
/// MAPE, summed test log predictive density, and PSIS-LOO ELPD (higher is better
/// for both densities).
pub fn render_tables(reports: &[EvaluationReport]) -> String {
    let mut out = table("MAPE (%)", reports, |m| m.mean_mape);
    out.push('\n');
    out.push_str(&table("test LPD", reports, |m| m.test_lpd));
    out.push('\n');
    out.push_str(&table("LOO ELPD", reports, |m| m.loo.as_ref().map(|l| l.elpd_loo)));
    let flagged: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.models.iter().filter_map(move |m| {
                m.loo
                    .as_ref()
                    .filter(|l| l.pareto.n_flagged() > 0)
                    .map(|l| format!("{} / {}: {} point(s) with k-hat > 0.7", r.dataset, m.name, l.pareto.n_flagged()))
            })
        })
        .collect();
    if !flagged.is_empty() {
        out.push('\n');
        for f in flagged {
            out.push_str(&f);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{preset, synthesize};
    use crate::evaluation::make_folds;
    use crate::evaluation::test_log_predictive_density;
    use crate::timebase::{parse_date, SeasonalityKind};

    fn small() -> (TimeSeries, FoldPlan) {
        let mut spec = preset("delivery-like", 1).unwrap();
        spec.start = parse_date("2017-10-01").unwrap();
        let s = synthesize(&spec).unwrap().series;
        let plan = make_folds(s.dates(), parse_date("2018-12-02").unwrap(), 10, 3).unwrap();
        (s, plan)
    }

    fn quick() -> BenchmarkSettings {
        BenchmarkSettings { n_draws: 200, map: MapOptions { restarts: 1, ..Default::default() }, ..Default::default() }
    }

    #[test]
    fn single_model_single_fold_reduces_to_metrics() {
        let (s, _) = small();
        let plan = make_folds(s.dates(), parse_date("2018-12-02").unwrap(), 10, 1).unwrap();
        let spec = ModelSpec::partial(SeasonalityKind::DayOfWeek);
        let settings = quick();
        let report = run_benchmark(&s, &[ModelEntry::pooling(spec.clone())], &plan, &settings);
        let m = &report.models[0];
        assert!(m.errors.is_empty(), "{:?}", m.errors);

        let (train, test) = plan.split(&s, &plan.folds[0]).unwrap();
        let seed = derive_seed(settings.seed, &[0, 0]);
        let fit = map_fit(&train, &spec, &settings.map.with_seed(seed)).unwrap();
        let d = ModelData::for_dates(test.dates(), None, &spec, &fit.info).unwrap();
        let f = destandardize(&predict_mean(&fit.map.params, &d.t, d.pooling.as_ref(), &spec).unwrap(), &fit.info);
        assert_eq!(m.mean_mape, Some(mape(test.values(), &f, ZeroPolicy::Error).unwrap()));
        let (train_data, _) = ModelData::prepare(&train, &spec).unwrap();
        let draws = laplace_draws(&fit.map, &train_data, &spec, settings.n_draws, seed).unwrap();
        let lpd = test_log_predictive_density(&draws, &spec, &test, &fit.info).unwrap();
        assert_eq!(m.test_lpd, Some(lpd.total));
        assert!(m.loo.is_some());
    }

    #[test]
    fn parallel_and_serial_agree_and_reruns_are_identical() {
        let (s, plan) = small();
        let models = [ModelEntry::pooling(ModelSpec::complete()), ModelEntry::fourier(FourierConfig::weekly())];
        let a = run_benchmark(&s, &models, &plan, &quick());
        let b = run_benchmark(&s, &models, &plan, &BenchmarkSettings { parallel: true, ..quick() });
        let c = run_benchmark(&s, &models, &plan, &quick());
        assert_eq!(report_csv(std::slice::from_ref(&a)).unwrap(), report_csv(&[b]).unwrap());
        assert_eq!(report_csv(std::slice::from_ref(&a)).unwrap(), report_csv(&[c]).unwrap());
        let table = render_tables(&[a]);
        assert!(table.contains("MAPE (%)") && table.contains("complete") && table.contains("fourier"));
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let (s, plan) = small();
        let missing = TimeSeries::new("ext", s.dates()[..5].to_vec(), vec![1.0; 5]).unwrap();
        let models =
            [ModelEntry::external(ExternalForecast { series: missing }), ModelEntry::pooling(ModelSpec::complete())];
        let r = run_benchmark(&s, &models, &plan, &quick());
        assert_eq!(r.models[0].mean_mape, None);
        assert!(r.models[0].errors.iter().all(|e| e.contains("alignment")));
        assert!(r.models[1].mean_mape.is_some());
    }

    #[test]
    fn identical_external_forecast_scores_identically() {
        let (s, plan) = small();
        let complete = ModelEntry::pooling(ModelSpec::complete());
        let r = run_benchmark(&s, std::slice::from_ref(&complete), &plan, &quick());
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for f in &r.models[0].folds {
            dates.extend_from_slice(&f.dates);
            values.extend_from_slice(f.forecast.as_ref().unwrap());
        }
        let ext = ExternalForecast { series: TimeSeries::new("copy", dates, values).unwrap() };
        let r2 = run_benchmark(&s, &[complete, ModelEntry::external(ext)], &plan, &quick());
        assert_eq!(r2.models[0].mean_mape, r2.models[1].mean_mape);
    }
}
