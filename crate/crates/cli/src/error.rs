use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] martlab_core::Error),
    #[error(transparent)]
    Ito(#[from] martlab_ito::Error),
    #[error(transparent)]
    Rough(#[from] martlab_rough::Error),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Violations = 1,
    Usage = 2,
}

impl Exit {
    pub fn from_passed(passed: bool) -> Self {
        if passed {
            Self::Ok
        } else {
            Self::Violations
        }
    }
}
