use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A quadrature's embedded error estimate exceeded its tolerance.
    #[error("quadrature accuracy: estimated error {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Accuracy { estimate: f64, tolerance: f64 },

    #[error("anisotropic kernel evaluated at its singular point x = 0")]
    Singularity,

    #[error("fixed-point iteration failed at step {step} (t = {time:.6}): {reason}")]
    Divergence {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("requested run time {requested:.4} exceeds the no-contamination horizon {horizon:.4}")]
    HorizonExceeded { requested: f64, horizon: f64 },

    #[error("particle speed {speed:.6} reached the cap {cap}")]
    Stability { speed: f64, cap: f64 },

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
