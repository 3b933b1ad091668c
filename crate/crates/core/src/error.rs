use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    Index { index: usize, num_qubits: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource guard exceeded: {0}")]
    Resource(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("first-order thermal parameters are degenerate: {0}")]
    DegenerateParameters(String),

    #[error("support mismatch: reference state vanishes where the argument has weight {weight:.3e}")]
    Support { weight: f64 },

    #[error("incomplete measurement data: {0}")]
    IncompleteData(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

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
