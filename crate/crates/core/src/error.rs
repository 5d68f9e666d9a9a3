use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("covariance is not positive definite (min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e})")]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("design is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("quadrature did not reach relative tolerance {tolerance:e} (estimate {estimate}, error {error:e})")]
    IntegrationFailure {
        tolerance: f64,
        estimate: f64,
        error: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (last iterate {last})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("degenerate noise: {0}")]
    DegenerateNoise(String),

    #[error("experiment configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
