use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("direction has (near) zero norm")]
    ZeroDirection,

    #[error("residual stack has no nonzero row")]
    DegenerateStack,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown id {id} for {kind}")]
    UnknownId { kind: &'static str, id: usize },

    #[error("sample diverged at step {step}")]
    Diverged { step: usize },

    #[error("training diverged at step {step} (loss = {loss})")]
    TrainingDiverged { step: usize, loss: f64 },

    #[error("no concept other than {target} co-occurs with attribute {attribute}")]
    NoDonor { target: usize, attribute: usize },

    #[error("quality gate failed: {0}")]
    Gate(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("replay mismatch for {0}")]
    ReplayMismatch(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }

    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Format { .. } | Error::Io { .. } => 2,
            Error::Diverged { .. } | Error::TrainingDiverged { .. } | Error::NonFinite(_) => 3,
            Error::Gate(_) | Error::ReplayMismatch(_) => 4,
            _ => 1,
        }
    }
}
