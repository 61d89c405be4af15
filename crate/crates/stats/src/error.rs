use thiserror::Error;

/// Failures raised by the statistical procedures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{0} is undefined for this input")]
    Undefined(String),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("rank deficient design: column `{column}` is linearly dependent on earlier columns")]
    RankDeficient { column: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;
