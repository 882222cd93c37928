use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("energy-shift violation: f + c = {0} must be strictly positive")]
    EnergyShiftViolation(f64),

    #[error("non-finite gradient component at index {0}")]
    NonFiniteGradient(usize),

    #[error("step produced a non-finite iterate")]
    NonFiniteIterate,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("batch size {batch} exceeds number of components {components}")]
    BatchTooLarge { batch: usize, components: usize },

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("dataset not found: {}", .0.display())]
    DatasetNotFound(PathBuf),

    #[error("energy audit requires an AEGD-family trace with per-coordinate detail ({0})")]
    NotEnergyTrace(String),

    #[error("not converged: energy still moving by {0:e} over the final window")]
    NotConverged(f64),

    #[error("bracket invalid: both ends of [{low}, {high}] classify as {class}")]
    BracketInvalid {
        low: f64,
        high: f64,
        class: &'static str,
    },

    #[error("insufficient decay: only {0} usable records before the numerical floor")]
    InsufficientDecay(usize),

    #[error("region violation: {0}")]
    RegionViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
