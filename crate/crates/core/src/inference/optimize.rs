//! Quasi-Newton ascent with a Wolfe line search, followed by Newton polishing.
//!
//! L-BFGS does the bulk of the work. When it stalls short of the gradient
//! tolerance (typically because objective differences drop below rounding
//! error), a few Newton steps on the finite-difference Hessian of the
//! analytic gradient finish the job.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::laplace::hessian_at;
use super::objective::LogDensity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub history: usize,
    /// Maximum Newton polishing steps after the quasi-Newton phase.
    pub newton_steps: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { max_iter: 1000, grad_tol: 1e-8, history: 10, newton_steps: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Search in the non-centered space that seeds a hierarchical fit.
    Warmup,
    Init,
    Lbfgs,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub phase: Phase,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl OptimizeOutcome {
    pub fn grad_norm(&self) -> f64 {
        norm(&self.grad)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluation of the minimization target `phi = -f`, with non-finite
/// results mapped to `+inf`.
struct Point {
    x: Vec<f64>,
    phi: f64,
    /// Gradient of `phi`.
    grad: Vec<f64>,
}

fn eval(target: &dyn LogDensity, x: Vec<f64>) -> Point {
    match target.log_density_and_grad(&x) {
        Ok((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => {
            Point { x, phi: -f, grad: g.into_iter().map(|v| -v).collect() }
        }
        _ => {
            let n = x.len();
            Point { x, phi: f64::INFINITY, grad: vec![f64::NAN; n] }
        }
    }
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LS: usize = 40;

fn step(x: &[f64], d: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// Minimizer of the cubic through two points with derivatives, safeguarded
/// into the interior of `[lo, hi]`.
fn interpolate(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let mid = 0.5 * (a + b);
    if !(fa.is_finite() && fb.is_finite() && da.is_finite() && db.is_finite()) {
        return mid;
    }
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    if t.is_finite() && t > lo + 0.1 * width && t < hi - 0.1 * width {
        t
    } else {
        mid
    }
}

struct LineSearch<'a> {
    target: &'a dyn LogDensity,
    x: &'a [f64],
    d: &'a [f64],
    phi0: f64,
    dphi0: f64,
    eps_f: f64,
}

impl LineSearch<'_> {
    fn at(&self, alpha: f64) -> (Point, f64) {
        let p = eval(self.target, step(self.x, self.d, alpha));
        let dphi = if p.phi.is_finite() { dot(&p.grad, self.d) } else { f64::NAN };
        (p, dphi)
    }

    fn sufficient(&self, alpha: f64, phi: f64) -> bool {
        phi <= self.phi0 + C1 * alpha * self.dphi0
    }

    fn curvature(&self, dphi: f64) -> bool {
        dphi.abs() <= -C2 * self.dphi0
    }

    /// Approximate Wolfe conditions: usable when objective changes are lost
    /// in rounding but the directional derivative is still informative.
    fn approx_wolfe(&self, phi: f64, dphi: f64) -> bool {
        phi <= self.phi0 + self.eps_f && dphi >= C2 * self.dphi0 && dphi <= (2.0 * C1 - 1.0) * self.dphi0
    }

    fn run(&self, alpha0: f64) -> Option<Point> {
        let mut a_prev = 0.0;
        let mut phi_prev = self.phi0;
        let mut dphi_prev = self.dphi0;
        let mut alpha = alpha0;
        for i in 0..MAX_LS {
            let (p, dphi) = self.at(alpha);
            if !p.phi.is_finite() || !self.sufficient(alpha, p.phi) || (i > 0 && p.phi >= phi_prev) {
                if self.approx_wolfe(p.phi, dphi) {
                    return Some(p);
                }
                return self.zoom((a_prev, phi_prev, dphi_prev), (alpha, p.phi, dphi));
            }
            if self.curvature(dphi) || self.approx_wolfe(p.phi, dphi) {
                return Some(p);
            }
            if dphi >= 0.0 {
                return self.zoom((alpha, p.phi, dphi), (a_prev, phi_prev, dphi_prev));
            }
            a_prev = alpha;
            phi_prev = p.phi;
            dphi_prev = dphi;
            alpha *= 2.0;
        }
        None
    }

    fn zoom(&self, mut lo: (f64, f64, f64), mut hi: (f64, f64, f64)) -> Option<Point> {
        for _ in 0..MAX_LS {
            if (hi.0 - lo.0).abs() <= 1e-16 * lo.0.abs().max(1.0) {
                break;
            }
            let alpha = interpolate(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
            let (p, dphi) = self.at(alpha);
            if !p.phi.is_finite() || !self.sufficient(alpha, p.phi) || p.phi >= lo.1 {
                if p.phi.is_finite() && self.approx_wolfe(p.phi, dphi) {
                    return Some(p);
                }
                hi = (alpha, p.phi, dphi);
            } else {
                if self.curvature(dphi) || self.approx_wolfe(p.phi, dphi) {
                    return Some(p);
                }
                if dphi * (hi.0 - lo.0) >= 0.0 {
                    hi = lo;
                }
                lo = (alpha, p.phi, dphi);
            }
        }
        // Fall back to the best strictly improving point seen, if any.
        if lo.0 > 0.0 && lo.1 < self.phi0 {
            let (p, _) = self.at(lo.0);
            return Some(p);
        }
        None
    }
}

/// Maximizes `target` from `x0`.
pub fn maximize(target: &dyn LogDensity, x0: &[f64], opts: &OptimizerOptions) -> Result<OptimizeOutcome> {
    let mut cur = eval(target, x0.to_vec());
    if !cur.phi.is_finite() {
        return Err(Error::Initialization(format!("objective is not finite at the initial point (dim {})", x0.len())));
    }
    let mut trace =
        vec![TraceRow { iteration: 0, phase: Phase::Init, objective: -cur.phi, grad_norm: norm(&cur.grad) }];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    let mut converged = norm(&cur.grad) <= opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        // Two-loop recursion for d = -H g.
        let mut q = cur.grad.clone();
        let mut alphas = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alphas[i] = rho * dot(&s_hist[i], &q);
            q.iter_mut().zip(&y_hist[i]).for_each(|(qv, yv)| *qv -= alphas[i] * yv);
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 1.0,
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for i in 0..s_hist.len() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            q.iter_mut().zip(&s_hist[i]).for_each(|(qv, sv)| *qv += (alphas[i] - beta) * sv);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut dphi0 = dot(&cur.grad, &d);
        if !(dphi0 < 0.0) {
            // Not a descent direction: reset memory and use steepest descent.
            s_hist.clear();
            y_hist.clear();
            d = cur.grad.iter().map(|v| -v).collect();
            dphi0 = dot(&cur.grad, &d);
        }
        let alpha0 = if s_hist.is_empty() { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
        let ls = LineSearch { target, x: &cur.x, d: &d, phi0: cur.phi, dphi0, eps_f: 1e-12 * (cur.phi.abs() + 1.0) };
        let Some(next) = ls.run(alpha0) else {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            iterations += 1;
            continue;
        };
        iterations += 1;
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > opts.history {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        let stalled = (cur.phi - next.phi).abs() <= f64::EPSILON * cur.phi.abs().max(1.0)
            && norm(&next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect::<Vec<_>>())
                <= 1e-14 * norm(&cur.x).max(1.0);
        cur = next;
        let gn = norm(&cur.grad);
        trace.push(TraceRow { iteration: iterations, phase: Phase::Lbfgs, objective: -cur.phi, grad_norm: gn });
        converged = gn <= opts.grad_tol;
        if stalled {
            break;
        }
    }

    if !converged {
        polish(target, &mut cur, &mut iterations, &mut trace, opts)?;
        converged = norm(&cur.grad) <= opts.grad_tol;
    }

    Ok(OptimizeOutcome {
        value: -cur.phi,
        grad: cur.grad.iter().map(|v| -v).collect(),
        x: cur.x,
        iterations,
        converged,
        trace,
    })
}

fn polish(
    target: &dyn LogDensity,
    cur: &mut Point,
    iterations: &mut usize,
    trace: &mut Vec<TraceRow>,
    opts: &OptimizerOptions,
) -> Result<()> {
    for _ in 0..opts.newton_steps {
        let gn = norm(&cur.grad);
        if gn <= opts.grad_tol {
            break;
        }
        let Ok(h) = hessian_at(target, &cur.x) else { break };
        // Newton step for phi: (-H_f) d = -grad_phi... with grad_phi = -grad_f.
        let neg_h: DMatrix<f64> = -h;
        let Some(chol) = neg_h.cholesky() else { break };
        let g_phi = DVector::from_column_slice(&cur.grad);
        let d = chol.solve(&(-g_phi));
        let d: Vec<f64> = d.iter().copied().collect();
        let mut accepted = false;
        let mut alpha = 1.0;
        for _ in 0..8 {
            let p = eval(target, step(&cur.x, &d, alpha));
            let tol = 1e-12 * (cur.phi.abs() + 1.0);
            if p.phi.is_finite() && p.phi <= cur.phi + tol && norm(&p.grad) < gn {
                *cur = p;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        *iterations += 1;
        trace.push(TraceRow {
            iteration: *iterations,
            phase: Phase::Newton,
            objective: -cur.phi,
            grad_norm: norm(&cur.grad),
        });
    }
    Ok(())
}
