//! Map between constrained parameters and an unconstrained vector.
//!
//! Positive scales go through `log`/`exp`, the mixture weights through
//! centered stick-breaking. Each hierarchical block (`k` or `m`) is stored
//! either directly (centered) or as `z` with `k[d][j] = k_mu + k_sigma * z`
//! (non-centered). Layout:
//!
//! * complete pooling: `[k, m, ln sigma_obs]`
//! * hierarchical: `[k_mu, ln k_sigma, m_mu, ln m_sigma, k.., m.., theta stick.., ln sigma_obs]`
//!
//! The centered density is unbounded as a hyper scale goes to zero with all
//! of its subcategories at the hypermean; the non-centered one is not.

use serde::{Deserialize, Serialize};

use super::simplex;
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, ModelSpec, ParameterSet};

/// Which hierarchical blocks are stored centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameterization {
    pub trend_centered: bool,
    pub offset_centered: bool,
}

impl Default for Parameterization {
    fn default() -> Self {
        Self::CENTERED
    }
}

impl Parameterization {
    pub const CENTERED: Self = Self { trend_centered: true, offset_centered: true };
    pub const NON_CENTERED: Self = Self { trend_centered: false, offset_centered: false };
    pub const TREND_NON_CENTERED: Self = Self { trend_centered: false, offset_centered: true };
    pub const OFFSET_NON_CENTERED: Self = Self { trend_centered: true, offset_centered: false };

    pub fn label(&self) -> &'static str {
        match (self.trend_centered, self.offset_centered) {
            (true, true) => "centered",
            (false, true) => "trend-non-centered",
            (true, false) => "offset-non-centered",
            (false, false) => "non-centered",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bijection {
    spec: ModelSpec,
    param: Parameterization,
    template: ParameterSet,
    layout: Vec<(String, usize)>,
    dim: usize,
    n_sub: usize,
}

/// Constrained point plus what the gradient pullback needs.
#[derive(Debug, Clone)]
pub struct Constrained {
    pub params: ParameterSet,
    pub log_jacobian: f64,
    stick_z: Vec<f64>,
    k_z: Vec<f64>,
    m_z: Vec<f64>,
}

impl Bijection {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        Self::with_parameterization(spec, Parameterization::CENTERED)
    }

    pub fn non_centered(spec: &ModelSpec) -> Result<Self> {
        Self::with_parameterization(spec, Parameterization::NON_CENTERED)
    }

    pub fn with_parameterization(spec: &ModelSpec, param: Parameterization) -> Result<Self> {
        spec.validate()?;
        let param = if spec.is_hierarchical() { param } else { Parameterization::CENTERED };
        let template = ParameterSet::template(spec);
        let mut layout = Vec::new();
        if spec.is_hierarchical() {
            layout.extend([("k_mu", 1), ("k_sigma", 1), ("m_mu", 1), ("m_sigma", 1)].map(|(n, l)| (n.to_string(), l)));
        }
        let sizes = spec.block_sizes();
        let n_sub: usize = sizes.iter().sum();
        layout.push((if param.trend_centered { "k" } else { "k_z" }.into(), n_sub));
        layout.push((if param.offset_centered { "m" } else { "m_z" }.into(), n_sub));
        if spec.has_free_theta() {
            layout.push(("theta".into(), sizes.len() - 1));
        }
        layout.push(("sigma_obs".into(), 1));
        let dim = layout.iter().map(|(_, l)| l).sum();
        Ok(Self { spec: spec.clone(), param, template, layout, dim, n_sub })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn parameterization(&self) -> Parameterization {
        self.param
    }

    /// Ordered `(parameter name, unconstrained length)` pairs.
    pub fn layout(&self) -> &[(String, usize)] {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_unconstrained(&self, params: &ParameterSet) -> Result<Vec<f64>> {
        params.validate(&self.spec)?;
        if params.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("parameter set contains non-finite values".into()));
        }
        let mut v = Vec::with_capacity(self.dim);
        let (kl, ks, ml, ms) = match &params.hyper {
            Some(h) => {
                v.extend([h.k_mu, h.k_sigma.ln(), h.m_mu, h.m_sigma.ln()]);
                (h.k_mu, h.k_sigma, h.m_mu, h.m_sigma)
            }
            None => (0.0, 1.0, 0.0, 1.0),
        };
        let encode = |centered: bool, loc: f64, scale: f64, x: f64| if centered { x } else { (x - loc) / scale };
        params.k.iter().flatten().for_each(|&k| v.push(encode(self.param.trend_centered, kl, ks, k)));
        params.m.iter().flatten().for_each(|&m| v.push(encode(self.param.offset_centered, ml, ms, m)));
        if self.spec.has_free_theta() {
            v.extend(simplex::stick_breaking_inverse(&params.theta));
        }
        v.push(params.sigma_obs.ln());
        Ok(v)
    }

    /// Constrained parameters and the log absolute Jacobian determinant.
    pub fn to_constrained(&self, v: &[f64]) -> Result<(ParameterSet, f64)> {
        let c = self.constrain(v)?;
        Ok((c.params, c.log_jacobian))
    }

    pub fn constrain(&self, v: &[f64]) -> Result<Constrained> {
        if v.len() != self.dim {
            return Err(Error::Index(format!("unconstrained vector has {} entries, expected {}", v.len(), self.dim)));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("unconstrained coordinate {i} is not finite ({})", v[i])));
        }
        let mut pos = 0;
        let mut next = |n: usize| {
            let s = &v[pos..pos + n];
            pos += n;
            s
        };
        let mut log_jacobian = 0.0;
        let hyper = if self.template.hyper.is_some() {
            let h = next(4);
            log_jacobian += h[1] + h[3];
            Some(Hyperparameters { k_mu: h[0], k_sigma: h[1].exp(), m_mu: h[2], m_sigma: h[3].exp() })
        } else {
            None
        };
        let (kl, ks, ml, ms) = match &hyper {
            Some(h) => (h.k_mu, h.k_sigma, h.m_mu, h.m_sigma),
            None => (0.0, 1.0, 0.0, 1.0),
        };
        let mut decode = |centered: bool, loc: f64, scale: f64| -> (Vec<Vec<f64>>, Vec<f64>, f64) {
            let raw = next(self.n_sub);
            let mut it = raw.iter();
            let blocks = self
                .template
                .k
                .iter()
                .map(|b| {
                    (0..b.len())
                        .map(|_| {
                            let x = *it.next().expect("layout length");
                            if centered {
                                x
                            } else {
                                loc + scale * x
                            }
                        })
                        .collect()
                })
                .collect();
            if centered {
                (blocks, Vec::new(), 0.0)
            } else {
                (blocks, raw.to_vec(), self.n_sub as f64 * scale.ln())
            }
        };
        let (k, k_z, jk) = decode(self.param.trend_centered, kl, ks);
        let (m, m_z, jm) = decode(self.param.offset_centered, ml, ms);
        log_jacobian += jk + jm;
        let (theta, stick_z) = if self.spec.has_free_theta() {
            let (theta, z, lj) = simplex::stick_breaking(next(self.template.theta.len() - 1));
            log_jacobian += lj;
            (theta, z)
        } else {
            (vec![1.0], Vec::new())
        };
        let ls = next(1)[0];
        log_jacobian += ls;
        let params = ParameterSet { hyper, k, m, theta, sigma_obs: ls.exp() };
        Ok(Constrained { params, log_jacobian, stick_z, k_z, m_z })
    }

    /// Unconstrained gradient of `f(constrain(v)) + log_jacobian(v)` given the
    /// constrained gradient of `f`.
    pub fn pullback(&self, c: &Constrained, g: &ParameterSet) -> Vec<f64> {
        let p = &c.params;
        let mut out = Vec::with_capacity(self.dim);
        let gk: Vec<f64> = g.k.iter().flatten().copied().collect();
        let gm: Vec<f64> = g.m.iter().flatten().copied().collect();
        match (&p.hyper, &g.hyper) {
            (Some(h), Some(gh)) => {
                // A non-centered block x = mu + sigma z feeds its gradient into
                // mu, ln sigma (plus the n ln sigma Jacobian) and z.
                let block = |centered: bool, gx: &[f64], z: &[f64], g_mu: f64, g_sigma: f64, sigma: f64| {
                    if centered {
                        (g_mu, g_sigma * sigma + 1.0, gx.to_vec())
                    } else {
                        let mu = g_mu + gx.iter().sum::<f64>();
                        let gz: f64 = gx.iter().zip(z).map(|(a, b)| a * b).sum();
                        let ls = (g_sigma + gz) * sigma + 1.0 + gx.len() as f64;
                        (mu, ls, gx.iter().map(|a| a * sigma).collect())
                    }
                };
                let (k_mu, k_ls, k_coords) =
                    block(self.param.trend_centered, &gk, &c.k_z, gh.k_mu, gh.k_sigma, h.k_sigma);
                let (m_mu, m_ls, m_coords) =
                    block(self.param.offset_centered, &gm, &c.m_z, gh.m_mu, gh.m_sigma, h.m_sigma);
                out.extend([k_mu, k_ls, m_mu, m_ls]);
                out.extend(k_coords);
                out.extend(m_coords);
            }
            _ => {
                out.extend(gk);
                out.extend(gm);
            }
        }
        if self.spec.has_free_theta() {
            out.extend(simplex::pullback(&p.theta, &c.stick_z, &g.theta));
        }
        out.push(g.sigma_obs * p.sigma_obs + 1.0);
        out
    }
}
