use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level} out of range for a tree of depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("depth {depth} exceeds the limit of {limit}")]
    DepthGuard { depth: usize, limit: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("process has {got} values but the tree has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("averaging property fails at node {node} (residual {residual:e})")]
    NotMartingale { node: usize, residual: f64 },
    #[error("processes live on different trees")]
    TreeMismatch,
    #[error("stopping rule is unbounded")]
    Unbounded,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
