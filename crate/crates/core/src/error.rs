use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration (bad waveform parameters, unknown keys, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// Array dimension mismatch between a grid and its waveform.
    #[error("shape error: {0}")]
    Shape(String),
    /// Input data violating an operation precondition.
    #[error("input error: {0}")]
    Input(String),
    /// A requested index or frequency is outside what the data covers.
    #[error("range error: {0}")]
    Range(String),
    /// A solver or estimator failed to produce a finite answer.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// The error text without its category prefix.
    pub fn message(&self) -> String {
        match self {
            Error::Config(m) | Error::Shape(m) | Error::Input(m) | Error::Range(m) | Error::Numerical(m) => m.clone(),
            other => other.to_string(),
        }
    }
}
