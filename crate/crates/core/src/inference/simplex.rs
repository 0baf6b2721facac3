//! Centered stick-breaking map between `R^(D-1)` and the open `D`-simplex.
//!
//! `z_i = logistic(y_i - ln(D - i - 1))`, `theta_i = z_i (1 - sum_{l<i} theta_l)`,
//! and the last component takes the remaining stick. The zero vector maps to
//! the uniform simplex.

#[inline]
fn log_logistic(x: f64) -> f64 {
    // ln(1 / (1 + e^-x)), stable for both signs.
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Forward transform. Returns the simplex, the break fractions `z`, and the
/// log absolute Jacobian determinant.
pub fn stick_breaking(y: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let d = y.len() + 1;
    let mut theta = Vec::with_capacity(d);
    let mut z = Vec::with_capacity(d - 1);
    let mut remaining = 1.0;
    let mut log_remaining = 0.0;
    let mut log_jac = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let x = yi - ((d - i - 1) as f64).ln();
        let zi = logistic(x);
        log_jac += log_logistic(x) + log_logistic(-x) + log_remaining;
        let th = remaining * zi;
        theta.push(th);
        z.push(zi);
        remaining -= th;
        log_remaining += log_logistic(-x);
    }
    theta.push(remaining.max(0.0));
    (theta, z, log_jac)
}

/// Inverse transform.
pub fn stick_breaking_inverse(theta: &[f64]) -> Vec<f64> {
    let d = theta.len();
    let mut out = Vec::with_capacity(d.saturating_sub(1));
    let mut remaining = 1.0;
    for (i, &th) in theta.iter().take(d.saturating_sub(1)).enumerate() {
        let z = th / remaining;
        out.push((z / (1.0 - z)).ln() + ((d - i - 1) as f64).ln());
        remaining -= th;
    }
    out
}

/// Gradient with respect to `y` of `sum_i g_theta[i] * theta_i(y) + log_jac(y)`.
pub fn pullback(theta: &[f64], z: &[f64], g_theta: &[f64]) -> Vec<f64> {
    let d = theta.len();
    let mut out = vec![0.0; d - 1];
    // tail[j] = sum_{i>j} g_i theta_i
    let mut tail = 0.0;
    for j in (0..d - 1).rev() {
        tail += g_theta[j + 1] * theta[j + 1];
        let zj = z[j];
        let through_theta = g_theta[j] * theta[j] * (1.0 - zj) - zj * tail;
        let through_jac = 1.0 - 2.0 * zj - (d - 2 - j) as f64 * zj;
        out[j] = through_theta + through_jac;
    }
    out
}
