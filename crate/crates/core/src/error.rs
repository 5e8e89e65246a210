use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("krylov propagation did not converge after {restarts} restarts (residual estimate {residual:.3e})")]
    KrylovNonConvergence { restarts: usize, residual: f64 },

    #[error("circuit error: {0}")]
    Circuit(String),

    #[error("circuit parse error at line {line}: {message}")]
    CircuitParse { line: usize, message: String },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("empty support: no counts on the first {0} basis states")]
    EmptySupport(usize),

    #[error("hardware counts: {0}")]
    HardwareCounts(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
