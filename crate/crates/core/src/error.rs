//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the statistical kernels and the sampler.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A censoring interval carries no probability mass under the current
    /// parameters, so the latent coordinate cannot be resampled.
    #[error("degenerate censoring interval: {0}")]
    DegenerateInterval(String),
    /// A Monte-Carlo estimate could not be formed (e.g. no conditioning events).
    #[error("estimate unavailable: {0}")]
    Unavailable(String),
    /// Invalid sampler state (non-finite posterior, inconsistent caches).
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
