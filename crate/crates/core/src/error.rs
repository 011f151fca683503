use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("covariance matrix is not positive definite (last jitter {jitter:e})")]
    Covariance { jitter: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("evaluation produced a non-finite value: {0}")]
    Evaluation(String),
    #[error("solution blew up; last valid time {last_time}")]
    Blowup { last_time: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("fit refused: {0}")]
    FitRefused(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
