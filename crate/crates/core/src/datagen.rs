//! Seeded synthetic series with known trend, seasonal effects and mixture weights.
//!
//! The generator mirrors the mixed pooling mean exactly:
//! `y_i = (sum_d w_d (trend_k + k_off[d][j])) t_i + sum_d w_d (trend_m + m_off[d][j]) + noise`
//! with `t` the training-window scale of the date range.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hyperparameters, ModelSpec, ParameterSet};
use crate::rng;
use crate::series::TimeSeries;
use crate::timebase::{build_pooling, date_range, parse_date, scaled_time, CalendarDate, SeasonalityKind, TimeScale};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalEffect {
    pub dim: SeasonalityKind,
    /// Per-subcategory growth offsets, length = cardinality.
    pub k_offset: Vec<f64>,
    /// Per-subcategory level offsets, length = cardinality.
    pub m_offset: Vec<f64>,
}

impl SeasonalEffect {
    pub fn flat(dim: SeasonalityKind) -> Self {
        Self { dim, k_offset: vec![0.0; dim.cardinality()], m_offset: vec![0.0; dim.cardinality()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub start: CalendarDate,
    pub end: CalendarDate,
    pub trend_k: f64,
    pub trend_m: f64,
    pub effects: Vec<SeasonalEffect>,
    /// Simplex over `effects`.
    pub weights: Vec<f64>,
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

/// A generated series and its noiseless mean.
#[derive(Debug, Clone)]
pub struct Synthesized {
    pub series: TimeSeries,
    pub mean: Vec<f64>,
    pub t: Vec<f64>,
}

pub const PRESETS: [&str; 3] = ["delivery-like", "restocking-like", "shipment-like"];

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.end <= self.start {
            return Err(Error::Config(format!("synthetic range {}..{} is empty", self.start, self.end)));
        }
        if self.effects.is_empty() {
            return Err(Error::Config("synthetic spec needs at least one seasonal effect".into()));
        }
        let dims: Vec<SeasonalityKind> = self.effects.iter().map(|e| e.dim).collect();
        crate::timebase::validate_dims(&dims)?;
        for e in &self.effects {
            let n = e.dim.cardinality();
            if e.k_offset.len() != n || e.m_offset.len() != n {
                return Err(Error::Config(format!(
                    "effect '{}' needs {n} k and m offsets, got {} and {}",
                    e.dim,
                    e.k_offset.len(),
                    e.m_offset.len()
                )));
            }
        }
        if self.weights.len() != self.effects.len() {
            return Err(Error::Config(format!("{} weights for {} effects", self.weights.len(), self.effects.len())));
        }
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights {:?} are not a simplex", self.weights)));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config(format!("noise_sd must be non-negative, got {}", self.noise_sd)));
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<SeasonalityKind> {
        self.effects.iter().map(|e| e.dim).collect()
    }

    pub fn dates(&self) -> Vec<CalendarDate> {
        date_range(self.start, self.end)
    }

    pub fn time_scale(&self) -> Result<TimeScale> {
        TimeScale::new(self.start, self.end.days_since(&self.start))
    }

    /// Half the peak-to-peak range of the weighted level offsets across
    /// subcategory combinations that actually occur in the date range.
    pub fn seasonal_amplitude(&self) -> f64 {
        let dates = self.dates();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in &dates {
            let v: f64 = self.effects.iter().zip(&self.weights).map(|(e, w)| w * e.m_offset[e.dim.index(d)]).sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        0.5 * (hi - lo)
    }

    /// Generating parameters expressed as a mixed pooling parameter set on
    /// the raw (unstandardized) scale. `sigma_obs` is the noise sd, or 1 for
    /// noise-free specs.
    pub fn true_parameters(&self) -> Result<(ModelSpec, ParameterSet)> {
        self.validate()?;
        let spec = ModelSpec::mixed(self.dims())?.with_standardize(false);
        let k: Vec<Vec<f64>> =
            self.effects.iter().map(|e| e.k_offset.iter().map(|o| self.trend_k + o).collect()).collect();
        let m: Vec<Vec<f64>> =
            self.effects.iter().map(|e| e.m_offset.iter().map(|o| self.trend_m + o).collect()).collect();
        let moments = |blocks: &Vec<Vec<f64>>| {
            let all: Vec<f64> = blocks.iter().flatten().copied().collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let sd = (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
            (mean, if sd > 0.0 { sd } else { 1.0 })
        };
        let (k_mu, k_sigma) = moments(&k);
        let (m_mu, m_sigma) = moments(&m);
        let params = ParameterSet {
            hyper: Some(Hyperparameters { k_mu, k_sigma, m_mu, m_sigma }),
            k,
            m,
            theta: self.weights.clone(),
            sigma_obs: if self.noise_sd > 0.0 { self.noise_sd } else { 1.0 },
        };
        Ok((spec, params))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

pub fn synthesize(spec: &SynthSpec) -> Result<Synthesized> {
    spec.validate()?;
    let dates = spec.dates();
    let t = scaled_time(&dates, &spec.time_scale()?)?;
    let pooling = build_pooling(&dates, &spec.dims())?;
    let mut rng = rng::stream(spec.seed, &[0x5359_4e54]);
    let mut mean = Vec::with_capacity(dates.len());
    let mut values = Vec::with_capacity(dates.len());
    for (i, &ti) in t.iter().enumerate() {
        let mut kk = 0.0;
        let mut mm = 0.0;
        for (d, (e, w)) in spec.effects.iter().zip(&spec.weights).enumerate() {
            let j = pooling.get(i, d);
            kk += w * (spec.trend_k + e.k_offset[j]);
            mm += w * (spec.trend_m + e.m_offset[j]);
        }
        let mu = kk * ti + mm;
        let z: f64 = StandardNormal.sample(&mut rng);
        mean.push(mu);
        values.push(mu + spec.noise_sd * z);
    }
    let series = TimeSeries::new(spec.name.clone(), dates, values)?;
    Ok(Synthesized { series, mean, t })
}

fn month_offsets(pairs: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; 31];
    for &(j, x) in pairs {
        v[j] = x;
    }
    v
}

/// Named presets shaped like the three logistics flows, over 2017-01-01..2018-12-31.
///
/// * `delivery-like`: weekdays high and growing, weekends low and flatter; no monthly effect.
/// * `restocking-like`: spikes at the start, middle and end of each month; no weekly effect.
/// * `shipment-like`: weekly and monthly effects mixed with weights 0.6 / 0.4.
///
/// Noise sd is 10% of the seasonal amplitude.
pub fn preset(name: &str, seed: u64) -> Result<SynthSpec> {
    let start = parse_date("2017-01-01")?;
    let end = parse_date("2018-12-31")?;
    let mut spec = match name {
        "delivery-like" => SynthSpec {
            name: name.into(),
            start,
            end,
            trend_k: 60.0,
            trend_m: 300.0,
            effects: vec![SeasonalEffect {
                dim: SeasonalityKind::DayOfWeek,
                k_offset: vec![30.0, 30.0, 30.0, 30.0, 30.0, -30.0, -30.0],
                m_offset: vec![150.0, 150.0, 150.0, 150.0, 150.0, -150.0, -150.0],
            }],
            weights: vec![1.0],
            noise_sd: 0.0,
            seed,
        },
        "restocking-like" => SynthSpec {
            name: name.into(),
            start,
            end,
            trend_k: 30.0,
            trend_m: 150.0,
            effects: vec![SeasonalEffect {
                dim: SeasonalityKind::DayOfMonth,
                k_offset: month_offsets(&[(0, 40.0), (14, 20.0), (29, 30.0), (30, 40.0)]),
                m_offset: month_offsets(&[
                    (0, 220.0),
                    (1, 90.0),
                    (13, 60.0),
                    (14, 150.0),
                    (15, 50.0),
                    (28, 70.0),
                    (29, 160.0),
                    (30, 220.0),
                ]),
            }],
            weights: vec![1.0],
            noise_sd: 0.0,
            seed,
        },
        "shipment-like" => SynthSpec {
            name: name.into(),
            start,
            end,
            trend_k: 40.0,
            trend_m: 400.0,
            effects: vec![
                SeasonalEffect {
                    dim: SeasonalityKind::DayOfWeek,
                    k_offset: vec![6.0, 6.0, 0.0, 0.0, 6.0, -6.0, -25.0],
                    m_offset: vec![37.0, 25.0, 12.0, 0.0, 25.0, -25.0, -148.0],
                },
                SeasonalEffect {
                    dim: SeasonalityKind::DayOfMonth,
                    k_offset: month_offsets(&[(0, 15.0), (14, 8.0), (29, 10.0), (30, 15.0)]),
                    m_offset: month_offsets(&[(0, 80.0), (14, 40.0), (29, 50.0), (30, 80.0)]),
                },
            ],
            weights: vec![0.6, 0.4],
            noise_sd: 0.0,
            seed,
        },
        other => {
            return Err(Error::Config(format!("unknown preset '{other}' (expected one of {})", PRESETS.join(", "))))
        }
    };
    spec.noise_sd = 0.1 * spec.seasonal_amplitude();
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::predict_mean;
    use crate::timebase::day_of_week;

    #[test]
    fn zero_noise_returns_mean() {
        let mut spec = preset("shipment-like", 1).unwrap();
        spec.noise_sd = 0.0;
        let s = synthesize(&spec).unwrap();
        assert_eq!(s.series.values(), s.mean.as_slice());
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = preset("delivery-like", 9).unwrap();
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&spec).unwrap();
        assert_eq!(a.series, b.series);
        let c = synthesize(&spec.clone().with_seed(10)).unwrap();
        assert_ne!(a.series.values(), c.series.values());
    }

    #[test]
    fn sunday_drop_shows_in_group_means() {
        // Only a level offset on Sunday, so group means differ by exactly it.
        let mut spec = preset("delivery-like", 4).unwrap();
        let e = &mut spec.effects[0];
        e.k_offset = vec![0.0; 7];
        e.m_offset = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -3.0];
        spec.noise_sd = 1.0;
        let s = synthesize(&spec).unwrap();
        let (mut sun, mut rest) = (Vec::new(), Vec::new());
        for (d, v) in s.series.dates().iter().zip(s.series.values()) {
            if day_of_week(d) == 6 {
                sun.push(*v);
            } else {
                rest.push(*v);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let diff = mean(&sun) - mean(&rest);
        let bound = 3.0 * spec.noise_sd / (sun.len() as f64).sqrt();
        assert!((diff + 3.0).abs() < bound, "diff {diff} bound {bound}");
    }

    #[test]
    fn unused_effects_do_not_leak() {
        let mut spec = preset("shipment-like", 2).unwrap();
        spec.weights = vec![1.0, 0.0];
        let a = synthesize(&spec).unwrap();
        spec.effects[1].m_offset.reverse();
        spec.effects[1].k_offset.rotate_left(5);
        let b = synthesize(&spec).unwrap();
        assert_eq!(a.series.values(), b.series.values());
    }

    #[test]
    fn true_parameters_reproduce_mean() {
        for name in PRESETS {
            let spec = preset(name, 3).unwrap();
            let s = synthesize(&spec).unwrap();
            let (mspec, params) = spec.true_parameters().unwrap();
            let pooling = build_pooling(s.series.dates(), &mspec.dims()).unwrap();
            let mu = predict_mean(&params, &s.t, Some(&pooling), &mspec).unwrap();
            for (a, b) in mu.iter().zip(&s.mean) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = preset("delivery-like", 0).unwrap();
        spec.weights = vec![0.5];
        assert!(synthesize(&spec).is_err());
        assert!(preset("nope", 0).is_err());
    }

    #[test]
    fn presets_stay_positive() {
        for name in PRESETS {
            let s = synthesize(&preset(name, 0).unwrap()).unwrap();
            assert!(s.series.values().iter().all(|v| *v > 0.0), "{name}");
        }
    }
}
