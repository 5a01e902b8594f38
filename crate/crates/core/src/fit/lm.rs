//! Damped nonlinear least squares (Levenberg-Marquardt).
//!
//! All fitted models are smooth and low-dimensional (<= 3 parameters), so a
//! compact dense implementation with analytic Jacobians, Marquardt diagonal
//! scaling, and a linearized covariance at the optimum is enough.

use crate::error::{Error, Result};
use crate::fit::{FitResult, FittedParameter, FrozenParameter};

/// A scalar model y = f(x; theta) with analytic partial derivatives.
pub trait LmModel {
    /// Number of free parameters.
    fn dim(&self) -> usize;
    /// Model value at `x`.
    fn value(&self, x: f64, theta: &[f64]) -> f64;
    /// Partial derivatives d f / d theta_j written into `out`.
    fn jacobian(&self, x: f64, theta: &[f64], out: &mut [f64]);
    /// Whether `theta` lies in the model's domain.
    fn feasible(&self, _theta: &[f64]) -> bool {
        true
    }
}

/// Observations with optional per-point 1-sigma weights.
pub struct FitData<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub sigmas: Option<&'a [f64]>,
}

impl FitData<'_> {
    fn weight(&self, i: usize) -> f64 {
        match self.sigmas {
            Some(s) => 1.0 / s[i].max(1e-300),
            None => 1.0,
        }
    }
}

pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative step tolerance: converged when max_j |delta_j|/(|theta_j|+tiny) falls below.
    pub rel_step_tol: f64,
    pub lambda_init: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iterations: 200, rel_step_tol: 1e-10, lambda_init: 1e-3 }
    }
}

/// Raw optimizer output before naming the parameters.
pub struct LmOutput {
    pub theta: Vec<f64>,
    /// Scaled covariance s^2 (J^T J)^-1 at the optimum.
    pub covariance: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutput {
    pub fn into_result(self, names: &[&str], frozen: &[(&str, f64)]) -> FitResult {
        let n = self.theta.len();
        let parameters = self
            .theta
            .iter()
            .enumerate()
            .map(|(j, &value)| {
                let var = self.covariance[j * n + j];
                let ci95 = if var.is_finite() && var >= 0.0 {
                    Some(1.96 * var.sqrt())
                } else {
                    None
                };
                FittedParameter { name: names[j].to_string(), value, ci95 }
            })
            .collect();
        FitResult {
            parameters,
            residual_norm: self.residual_norm,
            iterations: self.iterations,
            converged: self.converged,
            frozen: frozen
                .iter()
                .map(|(name, value)| FrozenParameter { name: name.to_string(), value: *value })
                .collect(),
            derived: Vec::new(),
        }
    }
}

fn cost(model: &dyn LmModel, data: &FitData, theta: &[f64]) -> f64 {
    let mut c = 0.0;
    for i in 0..data.xs.len() {
        let r = (model.value(data.xs[i], theta) - data.ys[i]) * data.weight(i);
        c += r * r;
    }
    c
}

/// Accumulate J^T J and J^T r at `theta`.
fn normal_equations(
    model: &dyn LmModel,
    data: &FitData,
    theta: &[f64],
    jtj: &mut [f64],
    jtr: &mut [f64],
) {
    let n = theta.len();
    jtj.fill(0.0);
    jtr.fill(0.0);
    let mut row = vec![0.0; n];
    for i in 0..data.xs.len() {
        let w = data.weight(i);
        let r = (model.value(data.xs[i], theta) - data.ys[i]) * w;
        model.jacobian(data.xs[i], theta, &mut row);
        for j in 0..n {
            let jij = row[j] * w;
            jtr[j] += jij * r;
            for k in j..n {
                jtj[j * n + k] += jij * row[k] * w;
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            jtj[j * n + k] = jtj[k * n + j];
        }
    }
}

/// Solve A x = b (n x n, row major) by Gaussian elimination with partial
/// pivoting. Returns None for a singular system.
fn solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] * inv;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut rhs = vec![0.0; n];
        rhs[col] = 1.0;
        let mut work = a.to_vec();
        let x = solve(&mut work, &mut rhs, n)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

/// Run Levenberg-Marquardt. Errors with [`Error::NonConvergence`] when the
/// damping explodes or the iteration budget runs out before the relative step
/// tolerance is met.
pub fn levenberg_marquardt(
    model: &dyn LmModel,
    data: &FitData,
    initial: &[f64],
    names: &[&str],
    options: &LmOptions,
) -> Result<LmOutput> {
    let n = model.dim();
    assert_eq!(initial.len(), n);
    assert_eq!(names.len(), n);
    if data.xs.len() != data.ys.len() {
        return Err(Error::InvalidParameter("xs/ys length mismatch".to_string()));
    }
    if data.xs.len() < n {
        return Err(Error::InvalidParameter(format!(
            "need at least {} points to fit {} parameters, got {}",
            n,
            n,
            data.xs.len()
        )));
    }
    if !model.feasible(initial) {
        return Err(Error::InvalidParameter(format!(
            "initial guess {initial:?} outside the model domain"
        )));
    }

    let mut theta = initial.to_vec();
    let mut lambda = options.lambda_init;
    let mut current_cost = cost(model, data, &theta);
    let mut jtj = vec![0.0; n * n];
    let mut jtr = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        normal_equations(model, data, &theta, &mut jtj, &mut jtr);

        // Inner damping loop: retry with larger lambda until a step helps.
        let mut stepped = false;
        while lambda < 1e14 {
            let mut damped = jtj.clone();
            for j in 0..n {
                let d = damped[j * n + j];
                damped[j * n + j] = d + lambda * d.max(1e-30);
            }
            let mut rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let delta = match solve(&mut damped, &mut rhs, n) {
                Some(d) => d,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let candidate: Vec<f64> =
                theta.iter().zip(&delta).map(|(t, d)| t + d).collect();
            if !candidate.iter().all(|v| v.is_finite()) || !model.feasible(&candidate) {
                lambda *= 10.0;
                continue;
            }
            let new_cost = cost(model, data, &candidate);
            if new_cost.is_finite() && new_cost <= current_cost {
                let rel_step = theta
                    .iter()
                    .zip(&delta)
                    .map(|(t, d)| d.abs() / (t.abs() + 1e-300))
                    .fold(0.0, f64::max);
                let rel_drop = (current_cost - new_cost) / current_cost.max(1e-300);
                theta = candidate;
                current_cost = new_cost;
                lambda = (lambda * 0.1).max(1e-13);
                stepped = true;
                if rel_step < options.rel_step_tol || rel_drop < 1e-15 || current_cost < 1e-300 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // No downhill step found: either we are at the minimum (gradient
            // ~ 0) or genuinely stuck.
            let grad_norm = jtr.iter().map(|v| v * v).sum::<f64>().sqrt();
            if grad_norm < 1e-8 * (1.0 + current_cost) {
                converged = true;
            }
            break;
        }
        if converged {
            break;
        }
    }

    if !converged {
        return Err(Error::NonConvergence { iterations, residual_norm: current_cost.sqrt() });
    }

    normal_equations(model, data, &theta, &mut jtj, &mut jtr);
    let m = data.xs.len();
    let scale = if m > n { current_cost / (m - n) as f64 } else { 1.0 };
    let covariance = match invert(&jtj, n) {
        Some(mut inv) => {
            inv.iter_mut().for_each(|v| *v *= scale);
            inv
        }
        None => vec![f64::NAN; n * n],
    };

    Ok(LmOutput {
        theta,
        covariance,
        residual_norm: current_cost.sqrt(),
        iterations,
        converged,
    })
}

/// Relative step of the finite-difference stencil.
const FD_STEP: f64 = 1e-3;

/// Five-point central finite-difference Jacobian (O(h^4) truncation), used to
/// audit the analytic derivatives of every model.
pub fn finite_difference_jacobian(
    model: &dyn LmModel,
    x: f64,
    theta: &[f64],
    out: &mut [f64],
) {
    let n = theta.len();
    let mut work = theta.to_vec();
    let eval = |w: &mut Vec<f64>, j: usize, v: f64| {
        w[j] = v;
        let f = model.value(x, w);
        w[j] = theta[j];
        f
    };
    for j in 0..n {
        let h = theta[j].abs().max(1e-12) * FD_STEP;
        let f1 = eval(&mut work, j, theta[j] + h);
        let f_1 = eval(&mut work, j, theta[j] - h);
        let f2 = eval(&mut work, j, theta[j] + 2.0 * h);
        let f_2 = eval(&mut work, j, theta[j] - 2.0 * h);
        out[j] = (8.0 * (f1 - f_1) - (f2 - f_2)) / (12.0 * h);
    }
}

/// Check the analytic Jacobian of `model` against the finite-difference one
/// at a single point, to `rel_tol` relative per entry.
///
/// Entries smaller than the finite-difference resolution floor
/// (roundoff of the f-value cancellation, eps |f| / h, with margin) cannot be
/// audited numerically and are skipped. Returns a description of the first
/// violation, if any.
pub fn verify_jacobian(
    model: &dyn LmModel,
    x: f64,
    theta: &[f64],
    rel_tol: f64,
) -> std::result::Result<(), String> {
    let n = model.dim();
    let mut analytic = vec![0.0; n];
    let mut fd = vec![0.0; n];
    model.jacobian(x, theta, &mut analytic);
    finite_difference_jacobian(model, x, theta, &mut fd);
    let f_scale = model.value(x, theta).abs().max(1e-3);
    for j in 0..n {
        let h = theta[j].abs().max(1e-12) * FD_STEP;
        // Below this magnitude the stencil noise eps |f| / h exceeds
        // rel_tol of the derivative itself.
        let floor = 3.0 * f64::EPSILON * f_scale / (h * rel_tol);
        if analytic[j].abs() < floor && fd[j].abs() < floor {
            continue;
        }
        let diff = (analytic[j] - fd[j]).abs();
        if diff > rel_tol * analytic[j].abs().max(fd[j].abs()) {
            return Err(format!(
                "param {j} at x = {x}: analytic {} vs finite difference {}",
                analytic[j], fd[j]
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// y = a exp(-b x), feasible for b > 0.
    struct Expo;

    impl LmModel for Expo {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: f64, theta: &[f64]) -> f64 {
            theta[0] * (-theta[1] * x).exp()
        }
        fn jacobian(&self, x: f64, theta: &[f64], out: &mut [f64]) {
            let e = (-theta[1] * x).exp();
            out[0] = e;
            out[1] = -theta[0] * x * e;
        }
        fn feasible(&self, theta: &[f64]) -> bool {
            theta[1] > 0.0
        }
    }

    #[test]
    fn recovers_exponential_exactly() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-0.7 * x).exp()).collect();
        let data = FitData { xs: &xs, ys: &ys, sigmas: None };
        let out = levenberg_marquardt(
            &Expo,
            &data,
            &[1.0, 0.3],
            &["a", "b"],
            &LmOptions::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert_relative_eq!(out.theta[0], 2.5, max_relative = 1e-8);
        assert_relative_eq!(out.theta[1], 0.7, max_relative = 1e-8);
        assert!(out.residual_norm < 1e-10);
    }

    #[test]
    fn covariance_reflects_noise_scale() {
        // With residuals ~ sigma, parameter CI must be finite and small
        // relative to the parameter.
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 2.5 * (-0.7 * x).exp() + if i % 2 == 0 { 1e-3 } else { -1e-3 })
            .collect();
        let data = FitData { xs: &xs, ys: &ys, sigmas: None };
        let out = levenberg_marquardt(
            &Expo,
            &data,
            &[1.0, 0.3],
            &["a", "b"],
            &LmOptions::default(),
        )
        .unwrap();
        let result = out.into_result(&["a", "b"], &[]);
        for p in &result.parameters {
            let ci = p.ci95.unwrap();
            assert!(ci.is_finite() && ci > 0.0 && ci < 0.05);
        }
    }

    #[test]
    fn rejects_underdetermined_data() {
        let data = FitData { xs: &[1.0], ys: &[1.0], sigmas: None };
        assert!(levenberg_marquardt(
            &Expo,
            &data,
            &[1.0, 0.5],
            &["a", "b"],
            &LmOptions::default()
        )
        .is_err());
    }

    #[test]
    fn finite_difference_matches_analytic() {
        let theta = [2.5, 0.7];
        let mut analytic = [0.0; 2];
        let mut fd = [0.0; 2];
        for x in [0.1, 1.0, 3.0] {
            Expo.jacobian(x, &theta, &mut analytic);
            finite_difference_jacobian(&Expo, x, &theta, &mut fd);
            for j in 0..2 {
                assert_relative_eq!(analytic[j], fd[j], max_relative = 1e-6);
            }
        }
    }
}
