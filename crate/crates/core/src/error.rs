use thiserror::Error;

/// Errors raised by the model, moment and estimation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters that do not describe a valid weight matrix / rate vector.
    #[error("invalid parameters at {location}: {reason}")]
    InvalidParams { location: String, reason: String },

    /// Exact enumeration refused because it exceeds the configured cost limits.
    #[error("enumeration too expensive: {0}")]
    TooExpensive(String),

    /// Data that cannot be used by the requested estimator.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A diagnostic check failed (bootstrap failure rate, GOF binning, ...).
    #[error("diagnostic error: {0}")]
    Diagnostic(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn params(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            location: location.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
