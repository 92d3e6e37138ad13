use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid base space: {0}")]
    InvalidBase(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("base space has no metric")]
    MissingMetric,

    #[error("configuration space too large: {0} configurations exceed the limit of {1}")]
    TooLarge(u128, usize),

    #[error("configuration with {total} particles exceeds the cap n_max = {n_max}")]
    ExceedsCap { total: usize, n_max: usize },

    #[error("measure kind {0} not supported here")]
    WrongMeasure(String),

    #[error("sector size {size} exceeds OT desk-scale limit {limit}")]
    DeskScale { size: usize, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
