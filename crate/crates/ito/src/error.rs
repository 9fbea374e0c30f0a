use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid of {n} steps exceeds the limit of {limit}")]
    GridTooLarge { n: usize, limit: usize },
    #[error("processes live on different sample spaces")]
    SpaceMismatch,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("process is not adapted: paths through node {node} disagree at time index {index}")]
    NotAdapted { node: usize, index: usize },
    #[error("{0} needs an exactly enumerated tree")]
    NeedsTree(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Core(#[from] martlab_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
