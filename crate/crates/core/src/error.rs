use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("encoding violation: {0}")]
    EncodingViolation(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("no result available: {0}")]
    NoResult(String),

    #[error("non-finite objective value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("degenerate test: {0}")]
    Degenerate(String),

    #[error("invalid CV plan: {0}")]
    InvalidPlan(String),

    #[error("{path}: row {row}: {message}")]
    IngestionRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("cannot oversample: {0}")]
    CannotOversample(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("experiment config error: {0}")]
    ExperimentConfig(String),

    #[error("incomparable runs: {0}")]
    IncomparableRuns(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
