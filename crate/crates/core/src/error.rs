use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum MedixError {
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("non-finite gradient at row {row}, column {col}")]
    NonFiniteGradient { row: usize, col: usize },
    #[error("non-finite feature value")]
    NonFiniteFeature,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("row {0} is not a live row")]
    DeadRow(usize),
    #[error("wild set smaller than removal batch (m = {m}, k = {k})")]
    WildSetTooSmall { m: usize, k: usize },
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("degenerate column {0}: zero variance")]
    DegenerateColumn(usize),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("separation violated: eps_dev ({eps_dev}) must be below Delta ({separation})")]
    SeparationViolated { eps_dev: f64, separation: f64 },
    #[error("tolerance below noise level: eps_dev ({eps_dev}) must exceed sigma ({sigma})")]
    ToleranceBelowNoise { eps_dev: f64, sigma: f64 },
    #[error("fourth moment unbounded: Student-t needs nu > 4, got {0}")]
    FourthMomentUnbounded(f64),
    #[error("insufficient pool: need {needed} samples, pool holds {available}")]
    InsufficientPool { needed: usize, available: usize },
    #[error("no candidate outliers; run filter first")]
    NoCandidateOutliers,
    #[error("step {step} exceeds the OOD pool size {pool}")]
    StepExceedsPool { step: usize, pool: usize },
    #[error("malformed input {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MedixError>;

impl MedixError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        MedixError::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MedixError::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        MedixError::Format { path: path.into(), reason: reason.into() }
    }
}
