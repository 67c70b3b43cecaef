use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid physical setup or run parameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The requested operation does not support this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tolerance:e} (value {value:e})")]
    Accuracy {
        value: f64,
        estimate: f64,
        tolerance: f64,
    },

    /// A least-squares fit could not be formed.
    #[error("fit error: {0}")]
    Fit(String),

    /// Trajectory integration failed (step underflow, usually at a density node).
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
