//! Nonlinear least squares with the model family used throughout the
//! analysis chain: damped cosine, stretched exponentials, Lorentzian,
//! mono-exponential decay, and polarization buildup.
//!
//! The engine is a damped Gauss-Newton (Levenberg-Marquardt style) loop
//! with central-finite-difference Jacobians. Positive-only parameters are
//! handled by log reparameterization internally and reported in natural
//! units; standard errors come from the residual-variance-scaled
//! covariance diagonal.

mod lm;
mod models;

pub use lm::{numeric_jacobian, Bounds, LmOptions};
pub use models::{
    fit_damped_cosine, fit_exponential_decay, fit_lorentzian, fit_polarization_buildup,
    fit_stretched_exponential, EnvelopeVariant,
};

use serde::Serialize;

use crate::error::{CoreError, Result};

/// One fitted (or derived) parameter.
#[derive(Debug, Clone, Serialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: String,
    pub parameters: Vec<FitParameter>,
    /// Covariance of the natural parameters, row-major.
    pub covariance: Vec<Vec<f64>>,
    /// sqrt(sum of squared residuals).
    pub residual_norm: f64,
    pub degrees_of_freedom: usize,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    /// Convergence / identifiability diagnostics.
    pub message: String,
    /// Reparameterizations (e.g. 1/e^2 times) with propagated errors.
    pub derived: Vec<FitParameter>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .chain(self.derived.iter())
            .find(|p| p.name == name)
            .map(|p| p.value)
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .chain(self.derived.iter())
            .find(|p| p.name == name)
            .map(|p| p.std_error)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    /// JSON report (parameters, errors, covariance, diagnostics).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

/// Fit `f(x, params)` to `(x, y)` by damped Gauss-Newton.
///
/// `bounds` may pin parameters to open intervals; the initial guess must
/// lie strictly inside. Requires at least as many points as parameters.
pub fn least_squares<F>(
    model: &str,
    names: &[&str],
    f: F,
    x: &[f64],
    y: &[f64],
    init: &[f64],
    bounds: Option<Bounds>,
) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let n_params = init.len();
    if names.len() != n_params {
        return Err(CoreError::FitSetup {
            message: format!(
                "{} parameter names for {} initial values",
                names.len(),
                n_params
            ),
        });
    }
    if x.len() != y.len() {
        return Err(CoreError::FitSetup {
            message: format!("x has {} points, y has {}", x.len(), y.len()),
        });
    }
    if x.len() < n_params {
        return Err(CoreError::FitSetup {
            message: format!("{} data points cannot constrain {n_params} parameters", x.len()),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(CoreError::FitSetup {
            message: "data contains non-finite values".into(),
        });
    }
    let bounds = match bounds {
        Some(b) => {
            if b.lower.len() != n_params || b.upper.len() != n_params {
                return Err(CoreError::FitSetup {
                    message: "bounds length mismatch".into(),
                });
            }
            b
        }
        None => Bounds::free(n_params),
    };

    let outcome = lm::minimize(&f, x, y, init, &bounds, &LmOptions::default())?;

    let mut message = outcome.message;
    let unidentifiable: Vec<&str> = names
        .iter()
        .zip(outcome.std_errors.iter())
        .filter(|(_, &e)| e.is_infinite())
        .map(|(&n, _)| n)
        .collect();
    if !unidentifiable.is_empty() {
        if !message.is_empty() {
            message.push_str("; ");
        }
        message.push_str(&format!("non-identifiable: {}", unidentifiable.join(", ")));
    }

    let parameters = names
        .iter()
        .zip(outcome.params.iter().zip(outcome.std_errors.iter()))
        .map(|(&name, (&value, &std_error))| FitParameter {
            name: name.to_string(),
            value,
            std_error,
        })
        .collect();

    Ok(FitResult {
        model: model.to_string(),
        parameters,
        covariance: outcome.covariance,
        residual_norm: outcome.cost.sqrt(),
        degrees_of_freedom: x.len().saturating_sub(n_params),
        converged: outcome.converged,
        iterations: outcome.iterations,
        restarts: outcome.restarts,
        message,
        derived: Vec::new(),
    })
}
