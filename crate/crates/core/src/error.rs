//! Error type shared by every module in the crate.

/// Failure modes surfaced by state construction, model evaluation, fitting,
/// and estimation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An argument violated a precondition (range, normalization, parity, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Inputs are individually valid but mutually inconsistent.
    #[error("inconsistent input: {0}")]
    Inconsistency(String),

    /// A phase estimate could not be formed from the given outcomes.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// The calibration fit stopped without meeting its convergence criterion.
    #[error("calibration fit did not converge after {iterations} iterations (residual rms {residual_rms:.3e})")]
    FitDidNotConverge { iterations: usize, residual_rms: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
