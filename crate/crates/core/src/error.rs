use thiserror::Error;

use crate::search::RunRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("not computable: {0}")]
    NotComputable(String),

    /// The data spans fewer directions than the requested projection.
    #[error("degenerate rank: achieved rank {rank}, requested {requested}")]
    DegenerateRank { rank: usize, requested: usize },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("denoiser failed at t={t}: {message}")]
    Model { t: usize, message: String },

    #[error("external reward failed: {message} (stdout: {stdout:?}, stderr: {stderr:?})")]
    ExternalReward {
        message: String,
        stdout: String,
        stderr: String,
    },

    /// Every candidate of a pool failed to score. Carries the record up to the failure.
    #[error("search failed at step {step}: every candidate in the pool failed to score")]
    SearchFailed { step: usize, record: Box<RunRecord> },

    #[error("report is empty: no successful rows")]
    ReportEmpty,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
