//! Fourier regression: one linear trend plus sine/cosine seasonal terms.
//!
//! `y ~ N(k t + X_t beta + m, sigma)` where `t` is the model time axis and
//! `X_t` is built from raw day offsets so that periods keep calendar meaning.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{maximize_with_restarts, LaplaceApprox, LogDensity, MapOptions, TraceRow};
use crate::model::density::normal_lpdf;
use crate::model::{standardize, PriorConstants, StandardizationInfo};
use crate::rng;
use crate::series::TimeSeries;
use crate::timebase::{day_offsets, scaled_time, CalendarDate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub period: f64,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FourierConfig {
    pub terms: Vec<FourierTerm>,
}

impl FourierConfig {
    pub fn new(terms: &[(f64, usize)]) -> Result<Self> {
        let cfg = Self { terms: terms.iter().map(|&(period, order)| FourierTerm { period, order }).collect() };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Weekly seasonality, `P = 7`, `n = 3`.
    pub fn weekly() -> Self {
        Self { terms: vec![FourierTerm { period: 7.0, order: 3 }] }
    }

    /// Monthly seasonality, `P = 30.4375`, `n = 5`.
    pub fn monthly() -> Self {
        Self { terms: vec![FourierTerm { period: 30.4375, order: 5 }] }
    }

    pub fn weekly_monthly() -> Self {
        Self { terms: [Self::weekly().terms, Self::monthly().terms].concat() }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, term) in self.terms.iter().enumerate() {
            if !(term.period.is_finite() && term.period > 0.0) {
                return Err(Error::Config(format!("Fourier period must be positive, got {}", term.period)));
            }
            if term.order == 0 {
                return Err(Error::Config(format!("Fourier order for period {} must be >= 1", term.period)));
            }
            if self.terms[..i].iter().any(|o| o.period == term.period) {
                return Err(Error::Config(format!("duplicate Fourier period {}", term.period)));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.terms.iter().map(|t| 2 * t.order).sum()
    }

    /// Label such as `fourier(7x3+30.4375x5)`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.terms.iter().map(|t| format!("{}x{}", t.period, t.order)).collect();
        format!("fourier({})", parts.join("+"))
    }
}

/// Row-major `T x n_features` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

/// Columns `[cos(2 pi 1 t/P), sin(2 pi 1 t/P), ..., cos(2 pi n t/P), sin(2 pi n t/P)]`
/// per term, terms in config order.
pub fn fourier_features(t_days: &[f64], config: &FourierConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    if let Some(i) = t_days.iter().position(|t| !t.is_finite()) {
        return Err(Error::Domain(format!("non-finite time at row {i}")));
    }
    let n_cols = config.n_features();
    let mut values = Vec::with_capacity(t_days.len() * n_cols);
    for &t in t_days {
        for term in &config.terms {
            for n in 1..=term.order {
                let a = 2.0 * PI * n as f64 * t / term.period;
                values.push(a.cos());
                values.push(a.sin());
            }
        }
    }
    Ok(FeatureMatrix { n_rows: t_days.len(), n_cols, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePrior {
    /// Half-normal kernel with scale `noise_sd_scale`.
    #[default]
    HalfNormal,
    /// Improper flat prior on the positive half-line.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FourierOptions {
    pub priors: PriorConstants,
    pub noise_prior: NoisePrior,
    pub standardize: bool,
    pub map: MapOptions,
}

impl Default for FourierOptions {
    fn default() -> Self {
        Self {
            priors: PriorConstants::default(),
            noise_prior: NoisePrior::HalfNormal,
            standardize: true,
            map: MapOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierParams {
    pub k: f64,
    pub m: f64,
    pub beta: Vec<f64>,
    pub sigma_obs: f64,
}

impl FourierParams {
    fn from_unconstrained(x: &[f64]) -> Self {
        let n = x.len();
        Self { k: x[0], m: x[1], beta: x[2..n - 1].to_vec(), sigma_obs: x[n - 1].exp() }
    }

    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut v = vec![self.k, self.m];
        v.extend_from_slice(&self.beta);
        v.push(self.sigma_obs.ln());
        v
    }

    /// Model-scale mean for rows with scaled time `t` and features `x`.
    pub fn mean(&self, t: &[f64], x: &FeatureMatrix) -> Vec<f64> {
        (0..t.len())
            .map(|i| self.k * t[i] + self.m + x.row(i).iter().zip(&self.beta).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

/// Model-scale regression data.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierData {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub x: FeatureMatrix,
}

impl FourierData {
    pub fn for_dates(
        dates: &[CalendarDate],
        values: Option<&[f64]>,
        config: &FourierConfig,
        info: &StandardizationInfo,
    ) -> Result<Self> {
        let t = scaled_time(dates, &info.time_scale)?;
        let x = fourier_features(&day_offsets(dates, &info.time_scale)?, config)?;
        let y = match values {
            Some(v) => info.apply(v),
            None => vec![0.0; dates.len()],
        };
        Ok(Self { y, t, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Jacobian-adjusted log posterior over `[k, m, beta.., ln sigma]`.
#[derive(Debug, Clone)]
pub struct FourierPosterior<'a> {
    pub data: &'a FourierData,
    pub priors: PriorConstants,
    pub noise_prior: NoisePrior,
}

impl LogDensity for FourierPosterior<'_> {
    fn dim(&self) -> usize {
        self.data.x.n_cols + 3
    }

    fn log_density_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::Config(format!("expected {} coordinates, got {}", self.dim(), x.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite unconstrained coordinate {i}")));
        }
        let p = FourierParams::from_unconstrained(x);
        let sigma = p.sigma_obs;
        let inv_var = 1.0 / (sigma * sigma);
        let nb = p.beta.len();
        let (sk, sm) = (self.priors.trend_loc_scale, self.priors.offset_loc_scale);
        let mut g = vec![0.0; x.len()];
        let mut value = normal_lpdf(p.k, 0.0, sk) + normal_lpdf(p.m, 0.0, sm);
        g[0] = -p.k / (sk * sk);
        g[1] = -p.m / (sm * sm);
        for (j, b) in p.beta.iter().enumerate() {
            value += normal_lpdf(*b, 0.0, sk);
            g[2 + j] = -b / (sk * sk);
        }
        let mut sum_sq = 0.0;
        for i in 0..self.data.len() {
            let row = self.data.x.row(i);
            let ti = self.data.t[i];
            let mu = p.k * ti + p.m + row.iter().zip(&p.beta).map(|(a, b)| a * b).sum::<f64>();
            let r = self.data.y[i] - mu;
            sum_sq += r * r;
            let w = r * inv_var;
            g[0] += w * ti;
            g[1] += w;
            for j in 0..nb {
                g[2 + j] += w * row[j];
            }
        }
        let n = self.data.len() as f64;
        value += -n * (crate::model::density::HALF_LN_2PI + sigma.ln()) - 0.5 * sum_sq * inv_var;
        let mut g_log_sigma = -n + sum_sq * inv_var;
        if self.noise_prior == NoisePrior::HalfNormal {
            let s = self.priors.noise_sd_scale;
            value += normal_lpdf(sigma, 0.0, s);
            g_log_sigma -= sigma * sigma / (s * s);
        }
        value += sigma.ln();
        g[nb + 2] = g_log_sigma + 1.0;
        Ok((value, g))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierFit {
    pub config: FourierConfig,
    pub options: FourierOptions,
    pub info: StandardizationInfo,
    pub params: FourierParams,
    pub objective: f64,
    pub unconstrained_opt: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub trace: Vec<TraceRow>,
}

impl FourierFit {
    pub fn label(&self) -> String {
        self.config.label()
    }
}

pub fn fit_fourier(series: &TimeSeries, config: &FourierConfig, opts: &FourierOptions) -> Result<FourierFit> {
    config.validate()?;
    opts.priors.validate()?;
    let info =
        if opts.standardize { standardize(series)?.1 } else { StandardizationInfo::identity(series.first_date()) };
    let data = FourierData::for_dates(series.dates(), Some(series.values()), config, &info)?;
    let target = FourierPosterior { data: &data, priors: opts.priors, noise_prior: opts.noise_prior };
    let best = maximize_with_restarts(&target, &opts.map)?;
    Ok(FourierFit {
        config: config.clone(),
        options: *opts,
        info,
        params: FourierParams::from_unconstrained(&best.outcome.x),
        objective: best.outcome.value,
        grad_norm: best.outcome.grad_norm(),
        unconstrained_opt: best.outcome.x,
        iterations: best.outcome.iterations,
        converged: best.outcome.converged,
        trace: best.outcome.trace,
    })
}

/// Original-scale point forecast `k t + X_t beta + m` for `dates`.
pub fn predict_fourier(
    params: &FourierParams,
    dates: &[CalendarDate],
    config: &FourierConfig,
    info: &StandardizationInfo,
) -> Result<Vec<f64>> {
    if params.beta.len() != config.n_features() {
        return Err(Error::Config(format!(
            "beta has {} entries but the config has {} features",
            params.beta.len(),
            config.n_features()
        )));
    }
    let data = FourierData::for_dates(dates, None, config, info)?;
    Ok(crate::model::destandardize(&params.mean(&data.t, &data.x), info))
}

/// Laplace draws of the Fourier posterior around a converged fit.
pub fn fourier_draws(fit: &FourierFit, series: &TimeSeries, n_draws: usize, seed: u64) -> Result<Vec<FourierParams>> {
    if !fit.converged {
        return Err(Error::Contract(format!(
            "Laplace draws need a converged MAP fit (grad norm {:.3e})",
            fit.grad_norm
        )));
    }
    let data = FourierData::for_dates(series.dates(), Some(series.values()), &fit.config, &fit.info)?;
    let target = FourierPosterior { data: &data, priors: fit.options.priors, noise_prior: fit.options.noise_prior };
    let approx = LaplaceApprox::at_mode(&target, &fit.unconstrained_opt)?;
    let mut rng = rng::stream(seed, &[0x4c41_504c]);
    Ok(approx.sample(n_draws, &mut rng).iter().map(|x| FourierParams::from_unconstrained(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{map_fit, MapOptions};
    use crate::model::ModelSpec;
    use crate::timebase::{date_range, parse_date};

    fn dates(n: i64) -> Vec<CalendarDate> {
        let s = parse_date("2018-01-01").unwrap();
        date_range(s, s.add_days(n - 1))
    }

    #[test]
    fn feature_examples() {
        let cfg = FourierConfig::new(&[(7.0, 3)]).unwrap();
        let x = fourier_features(&[0.0], &cfg).unwrap();
        assert_eq!(x.row(0), &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let cfg1 = FourierConfig::new(&[(7.0, 1)]).unwrap();
        let x = fourier_features(&[1.75], &cfg1).unwrap();
        assert!(x.row(0)[0].abs() < 1e-15 && (x.row(0)[1] - 1.0).abs() < 1e-15);
        let x = fourier_features(&[2.3, 9.3], &cfg).unwrap();
        for (a, b) in x.row(0).iter().zip(x.row(1)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(FourierConfig::new(&[(0.0, 1)]).is_err());
        assert!(FourierConfig::new(&[(7.0, 0)]).is_err());
        assert!(FourierConfig::new(&[(7.0, 1), (7.0, 2)]).is_err());
    }

    #[test]
    fn columns_average_to_zero_over_whole_periods() {
        let cfg = FourierConfig::new(&[(7.0, 3)]).unwrap();
        let t: Vec<f64> = (0..70).map(|i| i as f64).collect();
        let x = fourier_features(&t, &cfg).unwrap();
        for c in 0..x.n_cols {
            let mean = (0..x.n_rows).map(|i| x.row(i)[c]).sum::<f64>() / x.n_rows as f64;
            assert!(mean.abs() < 1e-6, "column {c} mean {mean}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = dates(40);
        let vals: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 * 0.1).collect();
        let s = TimeSeries::new("x", d.clone(), vals).unwrap();
        let cfg = FourierConfig::weekly_monthly();
        let (_, info) = standardize(&s).unwrap();
        let data = FourierData::for_dates(&d, Some(s.values()), &cfg, &info).unwrap();
        for prior in [NoisePrior::HalfNormal, NoisePrior::Flat] {
            let target = FourierPosterior { data: &data, priors: PriorConstants::default(), noise_prior: prior };
            let x: Vec<f64> = (0..target.dim()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
            let (_, g) = target.log_density_and_grad(&x).unwrap();
            for i in 0..x.len() {
                let h = 1e-5;
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (target.log_density(&xp).unwrap() - target.log_density(&xm).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * fd.abs().max(1.0), "coord {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn recovers_pure_sinusoid() {
        let d = dates(140);
        let vals: Vec<f64> = (0..140).map(|i| (2.0 * PI * i as f64 / 7.0).cos()).collect();
        let s = TimeSeries::new("cos", d, vals).unwrap();
        let opts = FourierOptions { standardize: false, ..Default::default() };
        let fit = fit_fourier(&s, &FourierConfig::weekly(), &opts).unwrap();
        let want = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (b, w) in fit.params.beta.iter().zip(want) {
            assert!((b - w).abs() < 1e-2, "{:?}", fit.params.beta);
        }
        assert!(fit.params.k.abs() < 1e-2);
    }

    #[test]
    fn zero_beta_is_a_straight_line() {
        let d = dates(10);
        let s = TimeSeries::new("x", d.clone(), (0..10).map(|i| i as f64).collect()).unwrap();
        let (_, info) = standardize(&s).unwrap();
        let p = FourierParams { k: 2.0, m: -0.5, beta: vec![0.0; 6], sigma_obs: 1.0 };
        let got = predict_fourier(&p, &d, &FourierConfig::weekly(), &info).unwrap();
        let t = scaled_time(&d, &info.time_scale).unwrap();
        for (g, ti) in got.iter().zip(&t) {
            let want = (2.0 * ti - 0.5) * info.y_sd + info.y_mean;
            assert!((g - want).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_white_noise_sd() {
        use rand_distr::{Distribution, Normal};
        let mut rng = rng::stream(5, &[1]);
        let n = 600;
        let vals: Vec<f64> = (0..n).map(|_| 10.0 + Normal::new(0.0, 2.0).unwrap().sample(&mut rng)).collect();
        let s = TimeSeries::new("noise", dates(n as i64), vals).unwrap();
        let opts = FourierOptions { standardize: false, ..Default::default() };
        let fit = fit_fourier(&s, &FourierConfig::weekly(), &opts).unwrap();
        assert!((fit.params.sigma_obs - 2.0).abs() < 0.2, "sigma {}", fit.params.sigma_obs);
    }

    #[test]
    fn empty_terms_match_complete_pooling() {
        let d = dates(60);
        let vals: Vec<f64> = (0..60).map(|i| 5.0 + 0.2 * i as f64 + ((i * 13 % 7) as f64 - 3.0)).collect();
        let s = TimeSeries::new("x", d, vals).unwrap();
        let opts = FourierOptions { noise_prior: NoisePrior::Flat, ..Default::default() };
        let f = fit_fourier(&s, &FourierConfig::default(), &opts).unwrap();
        let c = map_fit(&s, &ModelSpec::complete(), &MapOptions::default()).unwrap();
        assert!(f.converged && c.map.converged);
        assert!((f.params.k - c.map.params.k[0][0]).abs() < 1e-8);
        assert!((f.params.m - c.map.params.m[0][0]).abs() < 1e-8);
    }
}
