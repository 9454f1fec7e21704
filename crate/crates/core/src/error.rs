use std::path::PathBuf;

/// Errors produced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// Multiplier search ran out of iterations. Carries the last bracket on ζ₁.
    #[error("multiplier search did not converge after {iterations} iterations (bracket [{lower}, {upper}])")]
    Convergence {
        lower: f64,
        upper: f64,
        iterations: usize,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalDomain(_) | Error::Convergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
