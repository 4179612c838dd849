use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported pathloss model `{0}`")]
    UnsupportedModel(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("alternating optimization diverged at iteration {iteration}")]
    AoDiverged {
        iteration: usize,
        trace: Box<crate::solver::AoTrace>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn check_index(index: usize, max: usize) -> Result<()> {
    if index == 0 || index > max {
        Err(Error::IndexOutOfRange { index, max })
    } else {
        Ok(())
    }
}
