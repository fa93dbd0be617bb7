//! Damped Gauss-Newton minimizer with bound transforms and
//! finite-difference Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Open-interval parameter bounds; infinities leave a side free.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn free(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    /// All parameters free except `positive`, which get a lower bound of 0.
    pub fn positive(n: usize, positive: &[usize]) -> Self {
        let mut b = Self::free(n);
        for &i in positive {
            b.lower[i] = 0.0;
        }
        b
    }

    pub fn with_interval(mut self, index: usize, lower: f64, upper: f64) -> Self {
        self.lower[index] = lower;
        self.upper[index] = upper;
        self
    }
}

/// Loop controls; defaults implement the documented convergence contract
/// (relative cost change < 1e-10 or gradient norm < 1e-10).
#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub cost_tol: f64,
    pub grad_tol: f64,
    pub max_restarts: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            cost_tol: 1e-10,
            grad_tol: 1e-10,
            max_restarts: 5,
        }
    }
}

/// Internal <-> natural coordinate transform for one parameter.
#[derive(Debug, Clone, Copy)]
enum Transform {
    Free,
    /// p = lo + exp(u)
    Lower(f64),
    /// p = hi - exp(u)
    Upper(f64),
    /// p = lo + (hi - lo) * sigmoid(u)
    Interval(f64, f64),
}

impl Transform {
    fn from_bounds(lo: f64, hi: f64) -> Self {
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => Transform::Free,
            (true, false) => Transform::Lower(lo),
            (false, true) => Transform::Upper(hi),
            (true, true) => Transform::Interval(lo, hi),
        }
    }

    fn to_natural(&self, u: f64) -> f64 {
        match *self {
            Transform::Free => u,
            Transform::Lower(lo) => lo + u.exp(),
            Transform::Upper(hi) => hi - u.exp(),
            Transform::Interval(lo, hi) => lo + (hi - lo) / (1.0 + (-u).exp()),
        }
    }

    fn to_internal(&self, p: f64) -> Result<f64> {
        let fail = |msg: String| CoreError::FitSetup { message: msg };
        match *self {
            Transform::Free => Ok(p),
            Transform::Lower(lo) => {
                if p <= lo {
                    Err(fail(format!("initial value {p} violates lower bound {lo}")))
                } else {
                    Ok((p - lo).ln())
                }
            }
            Transform::Upper(hi) => {
                if p >= hi {
                    Err(fail(format!("initial value {p} violates upper bound {hi}")))
                } else {
                    Ok((hi - p).ln())
                }
            }
            Transform::Interval(lo, hi) => {
                if p <= lo || p >= hi {
                    Err(fail(format!("initial value {p} outside ({lo}, {hi})")))
                } else {
                    let s = (p - lo) / (hi - lo);
                    Ok((s / (1.0 - s)).ln())
                }
            }
        }
    }
}

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub message: String,
}

/// Central finite-difference Jacobian of the model in natural
/// coordinates, d f(x_i) / d p_j, with per-parameter adaptive steps
/// scaled by `step_scale`.
pub fn numeric_jacobian<F>(f: &F, x: &[f64], params: &[f64], step_scale: f64) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let eps_c = f64::EPSILON.cbrt();
    let n = x.len();
    let m = params.len();
    let mut jac = vec![vec![0.0; m]; n];
    let mut work = params.to_vec();
    for j in 0..m {
        let h = step_scale * eps_c * (params[j].abs() + eps_c);
        work[j] = params[j] + h;
        let plus: Vec<f64> = x.iter().map(|&xi| f(xi, &work)).collect();
        work[j] = params[j] - h;
        let minus: Vec<f64> = x.iter().map(|&xi| f(xi, &work)).collect();
        work[j] = params[j];
        for i in 0..n {
            jac[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

fn jacobian_internal<F>(
    f: &F,
    x: &[f64],
    u: &DVector<f64>,
    transforms: &[Transform],
) -> DMatrix<f64>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let eps_c = f64::EPSILON.cbrt();
    let n = x.len();
    let m = u.len();
    let mut jac = DMatrix::zeros(n, m);
    let mut work = u.clone();
    for j in 0..m {
        let h = eps_c * (u[j].abs() + eps_c);
        work[j] = u[j] + h;
        let p_plus = natural(&work, transforms);
        work[j] = u[j] - h;
        let p_minus = natural(&work, transforms);
        work[j] = u[j];
        for i in 0..n {
            jac[(i, j)] = (f(x[i], &p_plus) - f(x[i], &p_minus)) / (2.0 * h);
        }
    }
    jac
}

fn natural(u: &DVector<f64>, transforms: &[Transform]) -> Vec<f64> {
    u.iter()
        .zip(transforms.iter())
        .map(|(&ui, t)| t.to_natural(ui))
        .collect()
}

fn residuals<F>(f: &F, x: &[f64], y: &[f64], params: &[f64]) -> DVector<f64>
where
    F: Fn(f64, &[f64]) -> f64,
{
    DVector::from_iterator(
        x.len(),
        x.iter().zip(y.iter()).map(|(&xi, &yi)| yi - f(xi, params)),
    )
}

/// Deterministic multiplicative jitter applied to the initial guess on
/// restart r (r = 0 is the unmodified guess).
fn jittered(init: &[f64], restart: usize) -> Vec<f64> {
    if restart == 0 {
        return init.to_vec();
    }
    const PATTERN: [f64; 6] = [0.1, -0.1, 0.3, -0.25, 0.6, -0.4];
    init.iter()
        .enumerate()
        .map(|(j, &p)| {
            let s = PATTERN[(restart - 1 + j) % PATTERN.len()];
            if p == 0.0 {
                s
            } else {
                p * (1.0 + s)
            }
        })
        .collect()
}

pub(crate) fn minimize<F>(
    f: &F,
    x: &[f64],
    y: &[f64],
    init: &[f64],
    bounds: &Bounds,
    opts: &LmOptions,
) -> Result<LmOutcome>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let transforms: Vec<Transform> = bounds
        .lower
        .iter()
        .zip(bounds.upper.iter())
        .map(|(&lo, &hi)| Transform::from_bounds(lo, hi))
        .collect();

    // The unjittered initial guess must respect the bounds; jittered
    // restarts are clamped softly inside.
    for (j, &p) in init.iter().enumerate() {
        transforms[j].to_internal(p)?;
    }

    let mut total_iterations = 0usize;
    for restart in 0..=opts.max_restarts {
        let guess = jittered(init, restart);
        let Ok(u0) = guess
            .iter()
            .zip(transforms.iter())
            .map(|(&p, t)| t.to_internal(p))
            .collect::<Result<Vec<f64>>>()
        else {
            continue; // jitter pushed a parameter over a bound; try the next
        };
        let u0 = DVector::from_vec(u0);

        match lm_loop(f, x, y, u0, &transforms, opts) {
            LoopResult::Converged {
                u,
                cost,
                iterations,
            } => {
                total_iterations += iterations;
                return finish(
                    f,
                    x,
                    &u,
                    &transforms,
                    cost,
                    true,
                    total_iterations,
                    restart,
                    String::new(),
                );
            }
            LoopResult::Stalled {
                u,
                cost,
                iterations,
                message,
            } => {
                total_iterations += iterations;
                if restart == opts.max_restarts {
                    return finish(
                        f,
                        x,
                        &u,
                        &transforms,
                        cost,
                        false,
                        total_iterations,
                        restart,
                        message,
                    );
                }
            }
        }
    }
    unreachable!("restart loop always returns on the final pass")
}

enum LoopResult {
    Converged {
        u: DVector<f64>,
        cost: f64,
        iterations: usize,
    },
    Stalled {
        u: DVector<f64>,
        cost: f64,
        iterations: usize,
        message: String,
    },
}

fn lm_loop<F>(
    f: &F,
    x: &[f64],
    y: &[f64],
    mut u: DVector<f64>,
    transforms: &[Transform],
    opts: &LmOptions,
) -> LoopResult
where
    F: Fn(f64, &[f64]) -> f64,
{
    let m = u.len();
    let mut r = residuals(f, x, y, &natural(&u, transforms));
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0usize;

    loop {
        if cost < 1e-300 {
            return LoopResult::Converged { u, cost, iterations };
        }
        let jac = jacobian_internal(f, x, &u, transforms);
        let gradient = jac.transpose() * &r;
        if gradient.amax() < opts.grad_tol {
            return LoopResult::Converged { u, cost, iterations };
        }
        if iterations >= opts.max_iterations {
            return LoopResult::Stalled {
                u,
                cost,
                iterations,
                message: "iteration limit reached".into(),
            };
        }

        let jtj = jac.transpose() * &jac;
        let diag_max = (0..m).map(|k| jtj[(k, k)]).fold(0.0f64, f64::max);
        if !(diag_max > 0.0) {
            return LoopResult::Stalled {
                u,
                cost,
                iterations,
                message: "singular normal equations: zero Jacobian".into(),
            };
        }

        // Marquardt damping with retries at growing lambda.
        let mut accepted = false;
        while lambda < 1e14 {
            let mut damped = jtj.clone();
            for k in 0..m {
                damped[(k, k)] += lambda * jtj[(k, k)].max(diag_max * 1e-12);
            }
            let Some(step) = damped.clone().lu().solve(&gradient) else {
                lambda *= 10.0;
                continue;
            };
            let u_trial = &u + &step;
            let r_trial = residuals(f, x, y, &natural(&u_trial, transforms));
            let cost_trial = r_trial.norm_squared();
            if cost_trial.is_finite() && cost_trial < cost {
                let rel_change = (cost - cost_trial) / cost.max(1e-300);
                u = u_trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                iterations += 1;
                if rel_change < opts.cost_tol {
                    return LoopResult::Converged { u, cost, iterations };
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            return LoopResult::Stalled {
                u,
                cost,
                iterations,
                message: "no descent step found (singular or flat normal equations)".into(),
            };
        }
    }
}

/// Covariance and standard errors in natural coordinates.
#[allow(clippy::too_many_arguments)]
fn finish<F>(
    f: &F,
    x: &[f64],
    u: &DVector<f64>,
    transforms: &[Transform],
    cost: f64,
    converged: bool,
    iterations: usize,
    restarts: usize,
    mut message: String,
) -> Result<LmOutcome>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let params = natural(u, transforms);
    let m = params.len();
    let n = x.len();

    let jac_rows = numeric_jacobian(f, x, &params, 1.0);
    let jac = DMatrix::from_fn(n, m, |i, j| jac_rows[i][j]);

    // Columns with (near-)zero sensitivity are not identifiable; exclude
    // them from the normal equations and report infinite errors.
    let col_norms: Vec<f64> = (0..m).map(|j| jac.column(j).norm()).collect();
    let max_norm = col_norms.iter().cloned().fold(0.0f64, f64::max);
    let kept: Vec<usize> = (0..m)
        .filter(|&j| col_norms[j] > max_norm * 1e-12 && col_norms[j] > 0.0)
        .collect();
    if kept.len() < m {
        if !message.is_empty() {
            message.push_str("; ");
        }
        message.push_str(&format!(
            "{} parameter(s) not identifiable at the solution (zero sensitivity)",
            m - kept.len()
        ));
    }

    let dof = n.saturating_sub(m);
    let variance = if dof > 0 { cost / dof as f64 } else { 0.0 };

    let mut covariance = vec![vec![f64::INFINITY; m]; m];
    let mut std_errors = vec![f64::INFINITY; m];
    if !kept.is_empty() {
        let k = kept.len();
        let jac_kept = DMatrix::from_fn(n, k, |i, j| jac[(i, kept[j])]);
        let jtj = jac_kept.transpose() * &jac_kept;
        match jtj.clone().try_inverse() {
            Some(inv) => {
                for (a, &ja) in kept.iter().enumerate() {
                    for (b, &jb) in kept.iter().enumerate() {
                        covariance[ja][jb] = variance * inv[(a, b)];
                    }
                    std_errors[ja] = covariance[ja][ja].max(0.0).sqrt();
                }
            }
            None => {
                if !message.is_empty() {
                    message.push_str("; ");
                }
                message.push_str("singular normal equations at the solution");
            }
        }
    }

    Ok(LmOutcome {
        params,
        std_errors,
        covariance,
        cost,
        converged,
        iterations,
        restarts,
        message,
    })
}
