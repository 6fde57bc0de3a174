use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("column {0} not found")]
    MissingColumn(String),

    #[error("non-finite return at index {0}")]
    NonFiniteReturn(usize),

    #[error("origin price must be positive, got {0}")]
    NonPositiveOrigin(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no events fall inside the grid range")]
    NoInRangeEvents,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("action cache is stale for the supplied configuration")]
    StaleCache,

    #[error("base weight at bin {0} is zero")]
    ZeroBaseWeight(usize),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid annealing config: {0}")]
    InvalidConfig(String),

    #[error("unknown fixture {name:?}; available: {}", available.join(", "))]
    UnknownFixture {
        name: String,
        available: Vec<&'static str>,
    },

    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
