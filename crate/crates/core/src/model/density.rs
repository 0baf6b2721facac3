//! Prediction mean, priors, likelihood and their gradients.

use super::{standardize, Hyperparameters, ModelSpec, ParameterSet, StandardizationInfo};
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::timebase::{build_pooling, scaled_time, CalendarDate, PoolingAssignment};

pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Observations on the model scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    /// `None` for complete pooling.
    pub pooling: Option<PoolingAssignment>,
}

impl ModelData {
    pub fn new(y: Vec<f64>, t: Vec<f64>, pooling: Option<PoolingAssignment>) -> Result<Self> {
        if y.len() != t.len() {
            return Err(Error::Config(format!("y has {} entries but t has {}", y.len(), t.len())));
        }
        if let Some(p) = &pooling {
            if p.len() != t.len() {
                return Err(Error::Config(format!("pooling has {} rows but t has {}", p.len(), t.len())));
            }
        }
        if y.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("model data contains non-finite values".into()));
        }
        Ok(Self { y, t, pooling })
    }

    /// Standardizes a training series (when `ModelSpec::standardize` is set) and builds
    /// its time axis and pooling indices.
    pub fn prepare(series: &TimeSeries, spec: &ModelSpec) -> Result<(Self, StandardizationInfo)> {
        spec.validate()?;
        let info =
            if spec.standardize { standardize(series)?.1 } else { StandardizationInfo::identity(series.first_date()) };
        let data = Self::for_dates(series.dates(), Some(series.values()), spec, &info)?;
        Ok((data, info))
    }

    /// Model-scale data for arbitrary dates using an existing standardization
    /// (test folds, forecast horizons). Without values `y` is zero-filled.
    pub fn for_dates(
        dates: &[CalendarDate],
        values: Option<&[f64]>,
        spec: &ModelSpec,
        info: &StandardizationInfo,
    ) -> Result<Self> {
        let t = scaled_time(dates, &info.time_scale)?;
        let y = match values {
            Some(v) => info.apply(v),
            None => vec![0.0; dates.len()],
        };
        let pooling = if spec.is_hierarchical() { Some(build_pooling(dates, &spec.dims())?) } else { None };
        Self::new(y, t, pooling)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            y: rows.iter().map(|&i| self.y[i]).collect(),
            t: rows.iter().map(|&i| self.t[i]).collect(),
            pooling: self.pooling.as_ref().map(|p| p.select_rows(rows)),
        }
    }
}

fn check_layout(params: &ParameterSet, t: &[f64], pooling: Option<&PoolingAssignment>, spec: &ModelSpec) -> Result<()> {
    params.check_shape(spec)?;
    match (spec.is_hierarchical(), pooling) {
        (false, _) => Ok(()),
        (true, None) => Err(Error::Config(format!("model '{}' requires pooling indices", spec.label()))),
        (true, Some(p)) => {
            if p.dims() != spec.dims().as_slice() {
                return Err(Error::Config(format!(
                    "pooling dims {:?} do not match model dims {:?}",
                    p.dims(),
                    spec.dims()
                )));
            }
            if p.len() != t.len() {
                return Err(Error::Config(format!("pooling has {} rows but t has {}", p.len(), t.len())));
            }
            for i in 0..p.len() {
                for d in 0..p.n_dims() {
                    let j = p.get(i, d);
                    if j >= params.k[d].len() {
                        return Err(Error::Index(format!("pooling index {j} (row {i}, dim {d}) out of range")));
                    }
                }
            }
            Ok(())
        }
    }
}

#[inline]
fn sub(pooling: Option<&PoolingAssignment>, i: usize, d: usize) -> usize {
    pooling.map_or(0, |p| p.get(i, d))
}

/// Mixed growth and offset of row `i`.
#[inline]
fn row_coefficients(params: &ParameterSet, pooling: Option<&PoolingAssignment>, i: usize) -> (f64, f64) {
    let mut kk = 0.0;
    let mut mm = 0.0;
    for (d, w) in params.theta.iter().enumerate() {
        let j = sub(pooling, i, d);
        kk += w * params.k[d][j];
        mm += w * params.m[d][j];
    }
    (kk, mm)
}

/// `yhat_i = (sum_d theta_d k[d][pool_id]) t_i + sum_d theta_d m[d][pool_id]`.
pub fn predict_mean(
    params: &ParameterSet,
    t: &[f64],
    pooling: Option<&PoolingAssignment>,
    spec: &ModelSpec,
) -> Result<Vec<f64>> {
    check_layout(params, t, pooling, spec)?;
    Ok(predict_unchecked(params, t, pooling))
}

pub(crate) fn predict_unchecked(params: &ParameterSet, t: &[f64], pooling: Option<&PoolingAssignment>) -> Vec<f64> {
    t.iter()
        .enumerate()
        .map(|(i, &ti)| {
            let (kk, mm) = row_coefficients(params, pooling, i);
            kk * ti + mm
        })
        .collect()
}

#[inline]
pub(crate) fn normal_lpdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    -HALF_LN_2PI - sd.ln() - 0.5 * z * z
}

fn check_scales(params: &ParameterSet) -> Result<()> {
    if !(params.sigma_obs > 0.0) {
        return Err(Error::Domain(format!("sigma_obs must be positive, got {}", params.sigma_obs)));
    }
    if let Some(h) = &params.hyper {
        if !(h.k_sigma > 0.0 && h.m_sigma > 0.0) {
            return Err(Error::Domain(format!(
                "hyper scales must be positive, got k_sigma={} m_sigma={}",
                h.k_sigma, h.m_sigma
            )));
        }
    }
    Ok(())
}

/// Log prior density.
///
/// Complete pooling: `k, m ~ N(0, s)` and a flat prior on `sigma_obs`.
/// Hierarchical kinds: normal hypermeans, exponential hyper scales, every
/// `k[d][j] ~ N(k_mu, k_sigma)`, `m[d][j] ~ N(m_mu, m_sigma)`, and the
/// unnormalized half-normal kernel on `sigma_obs`. Theta is uniform on the
/// simplex and contributes nothing.
pub fn log_prior(params: &ParameterSet, spec: &ModelSpec) -> Result<f64> {
    params.check_shape(spec)?;
    check_scales(params)?;
    let pr = &spec.priors;
    match &params.hyper {
        None => Ok(normal_lpdf(params.k[0][0], 0.0, pr.trend_loc_scale)
            + normal_lpdf(params.m[0][0], 0.0, pr.offset_loc_scale)),
        Some(h) => {
            let rate = pr.hyper_sd_rate;
            let mut lp = normal_lpdf(h.k_mu, 0.0, pr.trend_loc_scale)
                + normal_lpdf(h.m_mu, 0.0, pr.offset_loc_scale)
                + (rate.ln() - rate * h.k_sigma)
                + (rate.ln() - rate * h.m_sigma);
            for block in &params.k {
                lp += block.iter().map(|&k| normal_lpdf(k, h.k_mu, h.k_sigma)).sum::<f64>();
            }
            for block in &params.m {
                lp += block.iter().map(|&m| normal_lpdf(m, h.m_mu, h.m_sigma)).sum::<f64>();
            }
            lp += normal_lpdf(params.sigma_obs, 0.0, pr.noise_sd_scale);
            Ok(lp)
        }
    }
}

pub fn pointwise_log_lik(params: &ParameterSet, data: &ModelData, spec: &ModelSpec) -> Result<Vec<f64>> {
    check_layout(params, &data.t, data.pooling.as_ref(), spec)?;
    check_scales(params)?;
    Ok(pointwise_unchecked(params, data))
}

pub(crate) fn pointwise_unchecked(params: &ParameterSet, data: &ModelData) -> Vec<f64> {
    let pooling = data.pooling.as_ref();
    let sigma = params.sigma_obs;
    data.t
        .iter()
        .zip(&data.y)
        .enumerate()
        .map(|(i, (&ti, &yi))| {
            let (kk, mm) = row_coefficients(params, pooling, i);
            normal_lpdf(yi, kk * ti + mm, sigma)
        })
        .collect()
}

pub fn log_likelihood(params: &ParameterSet, data: &ModelData, spec: &ModelSpec) -> Result<f64> {
    Ok(pointwise_log_lik(params, data, spec)?.iter().sum())
}

pub fn log_posterior(params: &ParameterSet, data: &ModelData, spec: &ModelSpec) -> Result<f64> {
    Ok(log_prior(params, spec)? + log_likelihood(params, data, spec)?)
}

/// Exact partial derivatives of [`log_posterior`] with respect to every
/// constrained parameter. The theta component is the derivative in the
/// full `D`-vector, before any simplex parameterization.
pub fn grad_constrained(params: &ParameterSet, data: &ModelData, spec: &ModelSpec) -> Result<ParameterSet> {
    check_layout(params, &data.t, data.pooling.as_ref(), spec)?;
    check_scales(params)?;
    Ok(value_and_grad_unchecked(params, data, spec).1)
}

/// Log posterior and its constrained gradient in one pass.
pub(crate) fn value_and_grad_unchecked(
    params: &ParameterSet,
    data: &ModelData,
    spec: &ModelSpec,
) -> (f64, ParameterSet) {
    let pooling = data.pooling.as_ref();
    let mut g = params.zeros_like();
    let sigma = params.sigma_obs;
    let inv_var = 1.0 / (sigma * sigma);
    let n_blocks = params.theta.len();

    let mut value = 0.0;
    let mut sum_sq = 0.0;
    for (i, (&ti, &yi)) in data.t.iter().zip(&data.y).enumerate() {
        let (kk, mm) = row_coefficients(params, pooling, i);
        let r = yi - (kk * ti + mm);
        sum_sq += r * r;
        let w = r * inv_var;
        for d in 0..n_blocks {
            let j = sub(pooling, i, d);
            let th = params.theta[d];
            g.k[d][j] += th * ti * w;
            g.m[d][j] += th * w;
            g.theta[d] += (params.k[d][j] * ti + params.m[d][j]) * w;
        }
    }
    let n = data.len() as f64;
    value += -n * (HALF_LN_2PI + sigma.ln()) - 0.5 * sum_sq * inv_var;
    g.sigma_obs = -n / sigma + sum_sq * inv_var / sigma;

    let pr = &spec.priors;
    match &params.hyper {
        None => {
            let (k, m) = (params.k[0][0], params.m[0][0]);
            value += normal_lpdf(k, 0.0, pr.trend_loc_scale) + normal_lpdf(m, 0.0, pr.offset_loc_scale);
            g.k[0][0] -= k / pr.trend_loc_scale.powi(2);
            g.m[0][0] -= m / pr.offset_loc_scale.powi(2);
        }
        Some(h) => {
            let Hyperparameters { k_mu, k_sigma, m_mu, m_sigma } = *h;
            let rate = pr.hyper_sd_rate;
            value += normal_lpdf(k_mu, 0.0, pr.trend_loc_scale)
                + normal_lpdf(m_mu, 0.0, pr.offset_loc_scale)
                + 2.0 * rate.ln()
                - rate * (k_sigma + m_sigma);
            let mut gh = Hyperparameters {
                k_mu: -k_mu / pr.trend_loc_scale.powi(2),
                k_sigma: -rate,
                m_mu: -m_mu / pr.offset_loc_scale.powi(2),
                m_sigma: -rate,
            };
            for (block, gblock) in params.k.iter().zip(g.k.iter_mut()) {
                for (&k, gk) in block.iter().zip(gblock.iter_mut()) {
                    let z = (k - k_mu) / k_sigma;
                    value += -HALF_LN_2PI - k_sigma.ln() - 0.5 * z * z;
                    *gk -= z / k_sigma;
                    gh.k_mu += z / k_sigma;
                    gh.k_sigma += (z * z - 1.0) / k_sigma;
                }
            }
            for (block, gblock) in params.m.iter().zip(g.m.iter_mut()) {
                for (&m, gm) in block.iter().zip(gblock.iter_mut()) {
                    let z = (m - m_mu) / m_sigma;
                    value += -HALF_LN_2PI - m_sigma.ln() - 0.5 * z * z;
                    *gm -= z / m_sigma;
                    gh.m_mu += z / m_sigma;
                    gh.m_sigma += (z * z - 1.0) / m_sigma;
                }
            }
            value += normal_lpdf(sigma, 0.0, pr.noise_sd_scale);
            g.sigma_obs -= sigma / pr.noise_sd_scale.powi(2);
            g.hyper = Some(gh);
        }
    }
    (value, g)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::timebase::SeasonalityKind::{DayOfMonth, DayOfWeek};

    fn pooling(dims: Vec<crate::timebase::SeasonalityKind>, rows: &[Vec<usize>]) -> PoolingAssignment {
        PoolingAssignment::from_indices(dims, rows).unwrap()
    }

    #[test]
    fn complete_prediction() {
        let p = ParameterSet::complete(2.0, 1.0, 1.0);
        let y = predict_mean(&p, &[3.0], None, &ModelSpec::complete()).unwrap();
        assert_eq!(y, vec![7.0]);
    }

    #[test]
    fn mixed_prediction_and_degenerate_theta() {
        let spec = ModelSpec::mixed(vec![DayOfWeek, DayOfMonth]).unwrap();
        let mut p = ParameterSet::template(&spec);
        p.theta = vec![0.5, 0.5];
        p.k[0][0] = 1.0;
        p.k[1][0] = 3.0;
        p.m[0][0] = 0.0;
        p.m[1][0] = 2.0;
        let pool = pooling(vec![DayOfWeek, DayOfMonth], &[vec![0, 0]]);
        let y = predict_mean(&p, &[2.0], Some(&pool), &spec).unwrap();
        assert_eq!(y, vec![5.0]);

        p.theta = vec![1.0, 0.0];
        let rows: Vec<Vec<usize>> = (0..14).map(|i| vec![i % 7, (i * 3) % 31]).collect();
        let pool = pooling(vec![DayOfWeek, DayOfMonth], &rows);
        let t: Vec<f64> = (0..14).map(|i| i as f64 / 13.0).collect();
        for j in 0..7 {
            p.k[0][j] = j as f64 * 0.3 - 1.0;
            p.m[0][j] = 2.0 - j as f64;
        }
        let mixed = predict_mean(&p, &t, Some(&pool), &spec).unwrap();
        let pspec = ModelSpec::partial(DayOfWeek);
        let mut pp = ParameterSet::template(&pspec);
        pp.k[0] = p.k[0].clone();
        pp.m[0] = p.m[0].clone();
        let week_rows: Vec<Vec<usize>> = rows.iter().map(|r| vec![r[0]]).collect();
        let ppool = pooling(vec![DayOfWeek], &week_rows);
        let partial = predict_mean(&pp, &t, Some(&ppool), &pspec).unwrap();
        assert_eq!(mixed, partial);
    }

    #[test]
    fn prior_term_values() {
        // Hierarchical prior at the template, isolating pieces by difference.
        let spec = ModelSpec::partial(DayOfWeek);
        let mut p = ParameterSet::template(&spec);
        let base = log_prior(&p, &spec).unwrap();
        // k_mu = 0 contributes -0.5 ln(2 pi 25).
        let h = p.hyper.as_mut().unwrap();
        h.k_mu = 0.0;
        let kmu_term = -0.5 * (2.0 * PI * 25.0).ln();
        assert!((kmu_term + 2.5284).abs() < 1e-4);
        // k_sigma = 1 under Exponential(1) contributes -1.
        let mut p2 = p.clone();
        p2.hyper.as_mut().unwrap().k_sigma = 2.0;
        // Moving k_sigma from 1 to 2 changes the exponential term by -1 and the
        // seven N(0, k_sigma) terms by -ln 2 each.
        let diff = log_prior(&p2, &spec).unwrap() - base;
        assert!((diff - (-1.0 - 7.0 * 2f64.ln())).abs() < 1e-12);
        // sigma_obs = 0.5 vs 1: difference of half-normal kernels.
        p.sigma_obs = 0.5;
        let with_half = log_prior(&p, &spec).unwrap();
        let kernel = |s: f64| -0.5 * (2.0 * PI * 0.25).ln() - s * s / (2.0 * 0.25);
        assert!((kernel(0.5) + 0.7258).abs() < 1e-4);
        assert!((with_half - base - (kernel(0.5) - kernel(1.0))).abs() < 1e-12);
    }

    #[test]
    fn likelihood_at_mode() {
        let spec = ModelSpec::complete();
        let p = ParameterSet::complete(0.0, 1.0, 1.0);
        let one = ModelData::new(vec![1.0], vec![0.0], None).unwrap();
        assert!((log_likelihood(&p, &one, &spec).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
        let two = ModelData::new(vec![1.0, 1.0], vec![0.0, 0.5], None).unwrap();
        assert!((log_likelihood(&p, &two, &spec).unwrap() + (2.0 * PI).ln()).abs() < 1e-12);
        let mut bad = p.clone();
        bad.sigma_obs = 0.0;
        assert!(matches!(log_likelihood(&bad, &two, &spec), Err(Error::Domain(_))));
    }

    #[test]
    fn index_out_of_range_is_reported() {
        let spec = ModelSpec::partial(DayOfWeek);
        let mut p = ParameterSet::template(&spec);
        p.k[0].truncate(3);
        p.m[0].truncate(3);
        let pool = pooling(vec![DayOfWeek], &[vec![5]]);
        assert!(matches!(predict_mean(&p, &[0.0], Some(&pool), &spec), Err(Error::Index(_))));
    }

    #[test]
    fn empty_subcategory_gradient_is_prior_only() {
        let spec = ModelSpec::partial(DayOfWeek);
        let mut p = ParameterSet::template(&spec);
        p.k[0][4] = 0.7;
        p.hyper.as_mut().unwrap().k_mu = 0.2;
        p.hyper.as_mut().unwrap().k_sigma = 0.5;
        let pool = pooling(vec![DayOfWeek], &[vec![0], vec![1], vec![2]]);
        let data = ModelData::new(vec![0.3, -0.1, 0.9], vec![0.0, 0.5, 1.0], Some(pool)).unwrap();
        let g = grad_constrained(&p, &data, &spec).unwrap();
        assert!((g.k[0][4] - (-(0.7 - 0.2) / 0.25)).abs() < 1e-12);
    }

    #[test]
    fn stationary_at_exact_complete_optimum() {
        // Noise-free y = a t + b; with the prior, the exact optimum solves
        // (X'X / s^2 + I / 25) beta = X'y / s^2.
        let t: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let y: Vec<f64> = t.iter().map(|ti| 2.0 * ti + 1.0).collect();
        let s2: f64 = 0.04;
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (ti, yi) in t.iter().zip(&y) {
            a11 += ti * ti / s2;
            a12 += ti / s2;
            a22 += 1.0 / s2;
            b1 += ti * yi / s2;
            b2 += yi / s2;
        }
        a11 += 1.0 / 25.0;
        a22 += 1.0 / 25.0;
        let det = a11 * a22 - a12 * a12;
        let k = (b1 * a22 - a12 * b2) / det;
        let m = (a11 * b2 - a12 * b1) / det;
        let p = ParameterSet::complete(k, m, s2.sqrt());
        let data = ModelData::new(y, t, None).unwrap();
        let g = grad_constrained(&p, &data, &ModelSpec::complete()).unwrap();
        assert!(g.k[0][0].abs() <= 1e-8, "{}", g.k[0][0]);
        assert!(g.m[0][0].abs() <= 1e-8, "{}", g.m[0][0]);
    }
}
