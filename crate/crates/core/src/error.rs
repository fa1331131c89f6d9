use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    #[error("instance {instance:?} has {got} candidates, {kind} tasks need {expected}")]
    Arity {
        instance: String,
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid judgment ({code}): {message}")]
    InvalidJudgment { code: &'static str, message: String },

    #[error("unknown {what} {id:?}")]
    Unknown { what: &'static str, id: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("missing embedding for {0:?}")]
    MissingEmbedding(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidJudgment {
            code,
            message: message.into(),
        }
    }

    /// Short machine-readable reason, used by the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Infeasible(_) => "infeasible",
            Error::Arity { .. } => "arity",
            Error::InvalidJudgment { code, .. } => code,
            Error::Unknown { .. } => "unknown",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::MissingEmbedding(_) => "missing_embedding",
            Error::Empty(_) => "empty",
            Error::Config(_) => "config",
            Error::Version { .. } => "version",
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        Error::Parse {
            line,
            message: err.to_string(),
        }
    }
}
