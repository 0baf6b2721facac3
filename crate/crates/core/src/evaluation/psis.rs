//! Generalized Pareto tail fits and Pareto-smoothed importance sampling LOO.

use serde::{Deserialize, Serialize};

use super::metrics::log_sum_exp;
use crate::error::{Error, Result};

/// Shape above which importance-sampling estimates are unreliable.
pub const K_HAT_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub k: f64,
    pub sigma: f64,
}

fn mean_log1p(theta: f64, x: &[f64]) -> f64 {
    x.iter().map(|v| (-theta * v).ln_1p()).sum::<f64>() / x.len() as f64
}

/// Zhang-Stephens estimate of the generalized Pareto shape `k` and scale
/// `sigma` from ascending positive exceedances.
///
/// With fewer than 5 values the fit is not attempted and `k` is `+inf`.
pub fn fit_generalized_pareto(x: &[f64]) -> GpdFit {
    let n = x.len();
    if n < 5 {
        return GpdFit { k: f64::INFINITY, sigma: f64::NAN };
    }
    let prior = 3.0;
    let m = 30 + (n as f64).sqrt().floor() as usize;
    let x_star = x[((n as f64) / 4.0 + 0.5).floor() as usize - 1];
    let x_max = x[n - 1];
    let thetas: Vec<f64> =
        (1..=m).map(|j| 1.0 / x_max + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / prior / x_star).collect();
    // Profile log likelihood of theta = -k / sigma.
    let l: Vec<f64> = thetas
        .iter()
        .map(|&th| {
            let k = mean_log1p(th, x);
            n as f64 * ((-th / k).ln() - k - 1.0)
        })
        .collect();
    let norm = log_sum_exp(l.iter().copied().filter(|v| v.is_finite()));
    let theta_hat: f64 =
        thetas.iter().zip(&l).filter(|(_, v)| v.is_finite()).map(|(th, v)| th * (v - norm).exp()).sum();
    let k = mean_log1p(theta_hat, x);
    GpdFit { k, sigma: -k / theta_hat }
}

/// GPD quantile function.
pub fn gpd_quantile(p: f64, fit: &GpdFit) -> f64 {
    if fit.k.abs() < 1e-12 {
        -fit.sigma * (-p).ln_1p()
    } else {
        fit.sigma * ((1.0 - p).powf(-fit.k) - 1.0) / fit.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoDiagnostic {
    pub k_hat: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl ParetoDiagnostic {
    pub fn from_k(k_hat: Vec<f64>) -> Self {
        let flagged = k_hat.iter().map(|k| *k > K_HAT_THRESHOLD).collect();
        Self { k_hat, flagged }
    }

    pub fn n_flagged(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }

    pub fn max_k(&self) -> f64 {
        self.k_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Smoothed log weights for one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedWeights {
    pub log_weights: Vec<f64>,
    pub k_hat: f64,
}

/// Pareto-smooths raw log ratios. The largest `M = min(ceil(0.2 S), ceil(3 sqrt S))`
/// ratios are replaced by expected GPD order statistics and all weights are
/// truncated at the raw maximum.
///
/// When the tail is constant there is nothing to fit: weights are left
/// unsmoothed and `k_hat` is `-inf`.
pub fn psis_smooth(log_ratios: &[f64]) -> SmoothedWeights {
    let s = log_ratios.len();
    let max = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = log_ratios.iter().map(|r| r - max).collect();
    let m = ((0.2 * s as f64).ceil() as usize).min((3.0 * (s as f64).sqrt()).ceil() as usize);
    if m < 5 || m >= s {
        return SmoothedWeights { log_weights: lw, k_hat: f64::INFINITY };
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
    let cutoff = lw[order[s - m - 1]];
    let tail = &order[s - m..];
    if lw[tail[0]] == lw[tail[m - 1]] {
        return SmoothedWeights { log_weights: lw, k_hat: f64::NEG_INFINITY };
    }
    let exp_cut = cutoff.exp();
    let excess: Vec<f64> = tail.iter().map(|&i| lw[i].exp() - exp_cut).collect();
    let positive: Vec<f64> = excess.iter().copied().filter(|v| *v > 0.0).collect();
    let fit = fit_generalized_pareto(&positive);
    if fit.k.is_finite() {
        for (j, &i) in tail.iter().enumerate() {
            let p = (j as f64 + 0.5) / m as f64;
            lw[i] = (gpd_quantile(p, &fit) + exp_cut).ln();
        }
    }
    for w in lw.iter_mut() {
        *w = w.min(0.0);
    }
    SmoothedWeights { log_weights: lw, k_hat: fit.k }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub elpd_loo: f64,
    pub per_point: Vec<f64>,
    pub pareto: ParetoDiagnostic,
}

/// PSIS-LOO from an `S x N` draws-by-points log-likelihood matrix.
pub fn psis_loo(loglik: &[Vec<f64>]) -> Result<LooResult> {
    let s = loglik.len();
    let Some(first) = loglik.first() else {
        return Err(Error::Contract("PSIS-LOO needs at least one draw".into()));
    };
    let n = first.len();
    for (d, row) in loglik.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Config(format!("draw {d} has {} points, expected {n}", row.len())));
        }
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite log likelihood at draw {d}, point {i}")));
        }
    }
    if s < 100 {
        log::warn!("PSIS-LOO with only {s} draws; at least 100 are recommended");
    }
    let mut per_point = Vec::with_capacity(n);
    let mut k_hat = Vec::with_capacity(n);
    for i in 0..n {
        let ll: Vec<f64> = loglik.iter().map(|r| r[i]).collect();
        let ratios: Vec<f64> = ll.iter().map(|v| -v).collect();
        let sw = psis_smooth(&ratios);
        if ll.iter().all(|v| *v == ll[0]) {
            // Any normalized weighting of a constant is that constant.
            per_point.push(ll[0]);
            k_hat.push(sw.k_hat);
            continue;
        }
        let num = log_sum_exp(sw.log_weights.iter().zip(&ll).map(|(w, l)| w + l));
        let den = log_sum_exp(sw.log_weights.iter().copied());
        per_point.push(num - den);
        k_hat.push(sw.k_hat);
    }
    Ok(LooResult { elpd_loo: per_point.iter().sum(), per_point, pareto: ParetoDiagnostic::from_k(k_hat) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn gpd_sample(k: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, &[7]);
        let fit = GpdFit { k, sigma };
        let mut x: Vec<f64> = (0..n).map(|_| gpd_quantile(r.random::<f64>(), &fit)).collect();
        x.sort_by(f64::total_cmp);
        x
    }

    #[test]
    fn recovers_gpd_shape() {
        let x = gpd_sample(0.3, 1.0, 10_000, 1);
        let f = fit_generalized_pareto(&x);
        assert!((f.k - 0.3).abs() < 0.1, "k {}", f.k);
        assert!((f.sigma - 1.0).abs() < 0.1, "sigma {}", f.sigma);
    }

    #[test]
    fn recovers_exponential_shape() {
        let x = gpd_sample(0.0, 2.0, 10_000, 2);
        let f = fit_generalized_pareto(&x);
        assert!(f.k.abs() < 0.1, "k {}", f.k);
    }

    fn gpd_loglik(x: &[f64], k: f64, sigma: f64) -> f64 {
        x.iter()
            .map(|v| {
                let z = 1.0 + k * v / sigma;
                if z <= 0.0 {
                    f64::NEG_INFINITY
                } else if k.abs() < 1e-12 {
                    -sigma.ln() - v / sigma
                } else {
                    -sigma.ln() - (1.0 / k + 1.0) * z.ln()
                }
            })
            .sum()
    }

    #[test]
    fn agrees_with_brute_force_grid_mle() {
        for (seed, k_true) in [(3, 0.2), (4, 0.5), (5, -0.1)] {
            let x = gpd_sample(k_true, 1.5, 2000, seed);
            let est = fit_generalized_pareto(&x);
            let mut best = (f64::NEG_INFINITY, 0.0);
            for ki in 0..=160 {
                let k = -0.4 + ki as f64 * 0.0075;
                for si in 0..=200 {
                    let sigma = 0.5 + si as f64 * 0.01;
                    let l = gpd_loglik(&x, k, sigma);
                    if l > best.0 {
                        best = (l, k);
                    }
                }
            }
            assert!((est.k - best.1).abs() < 0.05, "seed {seed}: zs {} grid {}", est.k, best.1);
        }
    }

    #[test]
    fn too_few_tail_points_is_infinite() {
        assert!(fit_generalized_pareto(&[0.1, 0.2, 0.3]).k.is_infinite());
    }

    #[test]
    fn identical_draws_give_exact_loglik() {
        let ll = vec![vec![-1.25, -0.5, -3.0]; 400];
        let loo = psis_loo(&ll).unwrap();
        assert_eq!(loo.per_point, vec![-1.25, -0.5, -3.0]);
        assert_eq!(loo.pareto.n_flagged(), 0);
    }

    #[test]
    fn smoothed_weights_never_exceed_raw_maximum() {
        let mut r = rng::stream(11, &[]);
        let ratios: Vec<f64> = (0..1000).map(|_| 3.0 * r.random::<f64>().powi(3) - 1.0).collect();
        let sw = psis_smooth(&ratios);
        assert!(sw.log_weights.iter().all(|w| *w <= 0.0));
    }

    #[test]
    fn loo_never_beats_in_sample_density() {
        let mut r = rng::stream(12, &[]);
        let ll: Vec<Vec<f64>> =
            (0..1000).map(|_| (0..8).map(|i| -1.0 - 0.3 * i as f64 * r.random::<f64>()).collect()).collect();
        let loo = psis_loo(&ll).unwrap();
        for i in 0..8 {
            let col: Vec<f64> = ll.iter().map(|row| row[i]).collect();
            let full = log_sum_exp(col.iter().copied()) - (col.len() as f64).ln();
            assert!(loo.per_point[i] <= full + 1e-12);
        }
    }

    #[test]
    fn fatter_ratio_tails_do_not_lower_k_hat() {
        use rand_distr::{Distribution, Normal};
        let median = |scale: f64| {
            let mut ks: Vec<f64> = (0..15)
                .map(|seed| {
                    let mut r = rng::stream(100 + seed, &[]);
                    let ratios: Vec<f64> = (0..2000).map(|_| Normal::new(0.0, scale).unwrap().sample(&mut r)).collect();
                    psis_smooth(&ratios).k_hat
                })
                .collect();
            ks.sort_by(f64::total_cmp);
            ks[ks.len() / 2]
        };
        let (a, b, c) = (median(0.5), median(1.0), median(2.0));
        assert!(a <= b && b <= c, "{a} {b} {c}");
    }

    #[test]
    fn non_finite_input_names_coordinates() {
        let ll = vec![vec![0.0, f64::NAN]];
        let err = psis_loo(&ll).unwrap_err().to_string();
        assert!(err.contains("draw 0") && err.contains("point 1"), "{err}");
    }
}
