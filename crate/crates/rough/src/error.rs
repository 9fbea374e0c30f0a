use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("paths are sampled on different grids")]
    GridMismatch,
    #[error("grid of {n} points exceeds the limit of {limit}")]
    GridTooLarge { n: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sewing sums are not Cauchy at level {level}: |ΔI| = {diff:e} > {allowed:e}")]
    NonCauchy { level: usize, diff: f64, allowed: f64 },
    #[error("sewing error {err:e} exceeds the a-priori bound {bound:e}")]
    SewingBound { err: f64, bound: f64 },
    #[error("controlled-integral remainder {norm:e} exceeds its bound {bound:e}")]
    RemainderBound { norm: f64, bound: f64 },
    #[error("Picard iterate {iteration} left the solution set: {detail}")]
    OutsideSolutionSpace { iteration: usize, detail: String },
    #[error("grid step {index} carries {size:e} of driver norm, above the threshold {eps:e}")]
    JumpTooLarge { index: usize, size: f64, eps: f64 },
    #[error("Picard metric failed to decrease for 3 consecutive iterations on [{start}, {end}]")]
    NotContracting { start: usize, end: usize },
    #[error("Picard iteration did not reach tolerance within {0} iterations")]
    MaxIter(usize),
    #[error(transparent)]
    Core(#[from] martlab_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
