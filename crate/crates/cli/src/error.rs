use std::io;
use std::path::PathBuf;

use kcnet::KcError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const DIMENSION: i32 = 5;
    pub const SINGULAR: i32 = 6;
    pub const CHECK_FAILED: i32 = 7;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] KcError),

    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: not a kcnet model file ({reason})")]
    ModelFormat { path: PathBuf, reason: String },

    #[error("gradient check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn file(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::File { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                KcError::Io(_) | KcError::ReadFile { .. } => exit::IO,
                KcError::BadMagic { .. }
                | KcError::TruncatedPayload { .. }
                | KcError::CountMismatch { .. }
                | KcError::MissingColumn(_)
                | KcError::RaggedRow { .. }
                | KcError::NonNumeric { .. }
                | KcError::UnknownLabel(_)
                | KcError::EmptyDataset
                | KcError::Csv(_) => exit::PARSE,
                KcError::DimensionMismatch { .. } => exit::DIMENSION,
                KcError::SingularGram { .. } | KcError::SingularAfterRetry { .. } => exit::SINGULAR,
                KcError::InvalidConfig(_) | KcError::TooFewClasses(_) | KcError::EmptySplit { .. } => exit::USAGE,
            },
            CliError::File { .. } => exit::IO,
            CliError::Config { .. } | CliError::ModelFormat { .. } => exit::PARSE,
            CliError::Usage(_) => exit::USAGE,
            CliError::CheckFailed(_) => exit::CHECK_FAILED,
            CliError::Json(_) => exit::OTHER,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
