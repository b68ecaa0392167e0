use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kinetic friction is undefined at zero relative rate; use the static branch")]
    ZeroSlipRate,

    #[error("episode is finished; call reset before stepping")]
    EpisodeFinished,

    #[error("episode has not been reset")]
    NotReset,

    #[error("conjugate gradient produced a non-finite iterate at iteration {0}")]
    SolverDiverged(usize),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
