//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not defined for the given kernel family or input.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A least-squares fit (decay rate, near-zero plateau) could not be formed.
    #[error("fit failure: {0}")]
    Fit(String),

    /// A quadrature or evaluation produced a non-finite or unconverged value.
    #[error("numeric failure: {message} (achieved estimate {estimate:e})")]
    Numeric { message: String, estimate: f64 },

    /// Invalid solver options or grid parameters.
    #[error("invalid parameter `{key}`: {message}")]
    InvalidParameter { key: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, estimate: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            estimate,
        }
    }

    pub(crate) fn param(key: &str, msg: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.to_string(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
