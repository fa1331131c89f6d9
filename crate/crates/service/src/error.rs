use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] a2t_core::Error),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("corrupt store: {0}")]
    CorruptStore(String),

    #[error("embedding provider: {0}")]
    Provider(String),

    #[error("{0}")]
    Data(String),
}

impl ServiceError {
    pub fn file(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| ServiceError::File { path, source }
    }

    /// Process exit status: 1 usage, 2 data, 3 infeasible constraint.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Usage(_) => 1,
            ServiceError::Core(e) if e.is_infeasible() => 3,
            _ => 2,
        }
    }
}
