use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("missing corpus file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error("invariant violated by {record}: {message}")]
    Invariant { record: String, message: String },
    #[error("unknown knowledge component `{kc_id}` referenced by {record}")]
    UnknownKc { kc_id: String, record: String },
    #[error("unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("segment `{0}` has no label")]
    Unlabeled(String),
    #[error("duplicate record {0}")]
    Duplicate(String),
    #[error("label sets differ: {0}")]
    IdMismatch(String),
    #[error("classifier endpoint failed: {0}")]
    Endpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Stats(#[from] reliance_stats::StatsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Serialize(String),
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io { path: path.into(), source }
    }

    pub fn invariant(record: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Invariant { record: record.into(), message: message.into() }
    }

    /// Errors caused by bad input data rather than the runtime environment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            CoreError::MissingFile(_)
                | CoreError::Malformed { .. }
                | CoreError::Invariant { .. }
                | CoreError::UnknownKc { .. }
                | CoreError::Duplicate(_)
                | CoreError::IdMismatch(_)
                | CoreError::Config(_)
        )
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            CoreError::MissingFile(_) => "missing_file",
            CoreError::Malformed { .. } => "malformed",
            CoreError::Invariant { .. } => "invariant",
            CoreError::UnknownKc { .. } => "unknown_kc",
            CoreError::UnknownSegment(_) => "unknown_segment",
            CoreError::Unlabeled(_) => "unlabeled",
            CoreError::Duplicate(_) => "duplicate",
            CoreError::IdMismatch(_) => "id_mismatch",
            CoreError::Endpoint(_) => "endpoint",
            CoreError::Config(_) => "config",
            CoreError::Stats(_) => "stats",
            CoreError::Io { .. } => "io",
            CoreError::Serialize(_) => "serialize",
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
