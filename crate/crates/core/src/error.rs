use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} outside 0..={n}")]
    Index { index: i64, n: u64 },

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("support violation at y = {y}: p(y) > 0 but q(y) = 0")]
    SupportViolation { y: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degree {degree} exceeds limit {limit}")]
    Degree { degree: usize, limit: usize },

    #[error("index {k} out of range (max {max})")]
    Range { k: usize, max: usize },

    #[error("inadmissible parameters: {0}")]
    Admissibility(String),

    #[error("invalid input distribution: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("support threshold removed every atom")]
    EmptySupport,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
