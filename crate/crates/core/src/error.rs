//! Error type shared by all modules.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A constructor or operation received an out-of-domain argument.
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// A state vector was not normalized to within the accepted tolerance.
    #[error("state vector norm deviates from 1 by {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    /// Overlap-continuity labeling could not find an unambiguous match.
    #[error("dressed-state label ambiguity for label {label}: best overlap^2 = {overlap_sq:.3}")]
    LabelAmbiguity { label: usize, overlap_sq: f64 },

    /// The sweep window does not end far enough from resonance.
    #[error(
        "sweep window too narrow for far-detuned identification: \
         margin {margin_hz:.3e} Hz < required {required_hz:.3e} Hz"
    )]
    WindowTooNarrow { margin_hz: f64, required_hz: f64 },

    /// A dressed state at a sweep endpoint is not close enough to a bare state.
    #[error(
        "far-detuned identification failed for label {label}: \
         bare-state overlap^2 = {overlap_sq:.4} <= 0.99"
    )]
    FarDetunedIdentification { label: usize, overlap_sq: f64 },

    /// Division by a zero sweep rate.
    #[error("sweep rate is zero; hopping probability undefined")]
    ZeroSweepRate,

    /// An operation requiring a uniform grid received a non-uniform one.
    #[error("non-uniform grid: {message}")]
    NonUniformGrid { message: String },

    /// Least-squares setup failure (insufficient data, bad bounds, ...).
    #[error("fit setup error: {message}")]
    FitSetup { message: String },
}
