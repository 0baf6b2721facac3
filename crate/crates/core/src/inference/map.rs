use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bijection::{Bijection, Parameterization};
use super::laplace::{DrawSource, LaplaceApprox};
use super::objective::{LogDensity, PoolingPosterior};
use super::optimize::{maximize, OptimizeOutcome, OptimizerOptions, Phase, TraceRow};
use crate::error::{Error, Result};
use crate::model::{log_posterior, ModelData, ModelSpec, ParameterSet, StandardizationInfo};
use crate::rng;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapOptions {
    #[serde(flatten)]
    pub optimizer: OptimizerOptions,
    /// Extra starts after the zero vector, each with seeded uniform jitter.
    pub restarts: usize,
    /// Half-width of the uniform jitter added to the zero start.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self { optimizer: OptimizerOptions::default(), restarts: 3, jitter: 1.0, seed: 0 }
    }
}

impl MapOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Best optimum over all starts of a generic target.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub outcome: OptimizeOutcome,
    pub restart: usize,
}

/// Runs the zero start plus `opts.restarts` jittered starts and keeps the
/// best converged run (or the best run when none converged).
pub fn maximize_with_restarts(target: &dyn LogDensity, opts: &MapOptions) -> Result<Optimum> {
    best_of_starts(target.dim(), opts, |x0| maximize(target, x0, &opts.optimizer))
}

fn best_of_starts(dim: usize, opts: &MapOptions, run: impl Fn(&[f64]) -> Result<OptimizeOutcome>) -> Result<Optimum> {
    let zero = vec![0.0; dim];
    let first = run(&zero)?;
    let mut best = Optimum { outcome: first, restart: 0 };
    for r in 1..=opts.restarts {
        let mut rng = rng::stream(opts.seed, &[0x004d_4150, r as u64]);
        let x0: Vec<f64> = (0..dim).map(|_| rng.random_range(-opts.jitter..=opts.jitter)).collect();
        let Ok(out) = run(&x0) else { continue };
        let better = match (out.converged, best.outcome.converged) {
            (true, false) => true,
            (false, true) => false,
            _ => out.value > best.outcome.value,
        };
        if better {
            best = Optimum { outcome: out, restart: r };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub params: ParameterSet,
    /// Log posterior at `params` (no Jacobian term).
    pub log_post: f64,
    /// Optimized objective: log posterior plus log Jacobian.
    pub objective: f64,
    pub unconstrained_opt: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub restart: usize,
    /// Coordinates `unconstrained_opt` is expressed in.
    #[serde(default)]
    pub parameterization: Parameterization,
    pub trace: Vec<TraceRow>,
}

/// Parameterizations tried in order for hierarchical models; the first
/// converged fit wins.
pub const PARAMETERIZATION_LADDER: [Parameterization; 4] = [
    Parameterization::CENTERED,
    Parameterization::TREND_NON_CENTERED,
    Parameterization::NON_CENTERED,
    Parameterization::OFFSET_NON_CENTERED,
];

/// MAP fit on data already on the model scale.
pub fn fit_prepared(data: &ModelData, spec: &ModelSpec, opts: &MapOptions) -> Result<MapResult> {
    if !spec.is_hierarchical() {
        return fit_parameterized(data, spec, opts, Parameterization::CENTERED);
    }
    let mut best: Option<MapResult> = None;
    for param in PARAMETERIZATION_LADDER {
        let fit = fit_parameterized(data, spec, opts, param)?;
        if fit.converged {
            return Ok(fit);
        }
        log::debug!("{} MAP did not converge (grad norm {:.3e})", param.label(), fit.grad_norm);
        if best.as_ref().is_none_or(|b| fit.objective > b.objective) {
            best = Some(fit);
        }
    }
    Ok(best.expect("ladder is not empty"))
}

/// MAP fit in one parameterization. Hierarchical fits start each run from
/// the fully non-centered optimum, which has no funnel.
pub fn fit_parameterized(
    data: &ModelData,
    spec: &ModelSpec,
    opts: &MapOptions,
    param: Parameterization,
) -> Result<MapResult> {
    if data.len() < 2 {
        return Err(Error::Data(format!("need at least 2 observations to fit, got {}", data.len())));
    }
    let target = PoolingPosterior::with_parameterization(spec, data, param)?;
    let param = target.bijection.parameterization();
    let best = if spec.is_hierarchical() && param != Parameterization::NON_CENTERED {
        let warm = PoolingPosterior::with_parameterization(spec, data, Parameterization::NON_CENTERED)?;
        best_of_starts(target.dim(), opts, |x0| {
            let first = maximize(&warm, x0, &opts.optimizer)?;
            let (p, _) = warm.bijection.to_constrained(&first.x)?;
            let start = target.bijection.to_unconstrained(&p)?;
            let mut out = maximize(&target, &start, &opts.optimizer)?;
            let mut trace: Vec<TraceRow> =
                first.trace.into_iter().map(|row| TraceRow { phase: Phase::Warmup, ..row }).collect();
            let offset = first.iterations;
            trace.extend(out.trace.into_iter().map(|row| TraceRow { iteration: row.iteration + offset, ..row }));
            out.trace = trace;
            out.iterations += offset;
            Ok(out)
        })?
    } else {
        maximize_with_restarts(&target, opts)?
    };
    let (params, _) = target.bijection.to_constrained(&best.outcome.x)?;
    let log_post = log_posterior(&params, data, spec)?;
    Ok(MapResult {
        params,
        log_post,
        objective: best.outcome.value,
        grad_norm: best.outcome.grad_norm(),
        unconstrained_opt: best.outcome.x,
        iterations: best.outcome.iterations,
        converged: best.outcome.converged,
        restart: best.restart,
        parameterization: param,
        trace: best.outcome.trace,
    })
}

/// A MAP fit together with what is needed to score new dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingFit {
    pub spec: ModelSpec,
    pub info: StandardizationInfo,
    pub map: MapResult,
}

/// Standardizes `series`, builds its pooling, and finds the MAP.
pub fn map_fit(series: &TimeSeries, spec: &ModelSpec, opts: &MapOptions) -> Result<PoolingFit> {
    let (data, info) = ModelData::prepare(series, spec)?;
    let map = fit_prepared(&data, spec, opts)?;
    Ok(PoolingFit { spec: spec.clone(), info, map })
}

/// Posterior draws in both parameterizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub unconstrained: Vec<Vec<f64>>,
    pub params: Vec<ParameterSet>,
    pub seed: u64,
    pub source: DrawSource,
}

impl PosteriorDraws {
    /// `n` copies of a single parameter set.
    pub fn point(params: &ParameterSet, unconstrained: &[f64], n: usize) -> Self {
        Self {
            unconstrained: vec![unconstrained.to_vec(); n.max(1)],
            params: vec![params.clone(); n.max(1)],
            seed: 0,
            source: DrawSource::Point,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Laplace approximation at the MAP of a pooling model, expressed in the
/// centered coordinates of [`Bijection::new`].
///
/// The Hessian is taken in the parameterization the MAP was found in. A
/// non-centered Gaussian is then mapped to centered coordinates through its
/// linearization, since sampling `z` and `ln sigma` independently of the data
/// fit would scatter `k = mu + sigma z` far beyond what the data allow.
pub fn laplace_at(fit: &MapResult, data: &ModelData, spec: &ModelSpec) -> Result<LaplaceApprox> {
    let target = PoolingPosterior::with_parameterization(spec, data, fit.parameterization)?;
    let approx = LaplaceApprox::at_mode(&target, &fit.unconstrained_opt)?;
    if target.bijection.parameterization() == Parameterization::CENTERED {
        return Ok(approx);
    }
    let centered = Bijection::new(spec)?;
    approx.reparameterize(|v| centered.to_unconstrained(&target.bijection.to_constrained(v)?.0))
}

pub fn laplace_draws(
    fit: &MapResult,
    data: &ModelData,
    spec: &ModelSpec,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    if !fit.converged {
        return Err(Error::Contract(format!(
            "Laplace draws need a converged MAP fit (grad norm {:.3e})",
            fit.grad_norm
        )));
    }
    let approx = laplace_at(fit, data, spec)?;
    draws_from(&approx, &Bijection::new(spec)?, n_draws, seed)
}

pub fn draws_from(approx: &LaplaceApprox, bijection: &Bijection, n_draws: usize, seed: u64) -> Result<PosteriorDraws> {
    let mut rng = rng::stream(seed, &[0x4c41_504c]);
    let unconstrained = approx.sample(n_draws, &mut rng);
    let params =
        unconstrained.iter().map(|v| bijection.to_constrained(v).map(|(p, _)| p)).collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDraws { unconstrained, params, seed, source: DrawSource::Laplace })
}
