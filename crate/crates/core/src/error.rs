use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate encounter for patient {patient_id} on {date}")]
    DuplicateEncounter { patient_id: String, date: String },

    #[error("record {pair_id} has no adherence label")]
    MissingLabel { pair_id: String },

    #[error("record {pair_id} is missing {what}")]
    MissingValue { pair_id: String, what: &'static str },

    #[error("perfect separation: coefficient {index} reached {value:.3}")]
    Separation {
        index: usize,
        value: f64,
        /// Last iterate before divergence was declared.
        coefficients: Vec<f64>,
    },

    #[error("information matrix is singular or not positive definite")]
    Singular,

    #[error("fit did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("2x2 table has a zero cell")]
    ZeroCell,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("unseen level '{level}' for column '{column}'")]
    UnseenCategory { column: String, level: String },

    #[error("group '{0}' is empty")]
    EmptyGroup(String),

    #[error("extraction failed for {pair_id}: {reason}")]
    ExtractionFailed {
        pair_id: String,
        reason: String,
        raw_reply: String,
    },

    #[error("backend unavailable after {attempts} attempts: {message}")]
    Transient { attempts: u32, message: String },

    #[error("backend rejected the request: {0}")]
    Backend(String),

    #[error("infeasible sampling: {0}")]
    Infeasible(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DuplicateEncounter { .. } => "duplicate_encounter",
            Error::MissingLabel { .. } => "missing_label",
            Error::MissingValue { .. } => "missing_value",
            Error::Separation { .. } => "separation",
            Error::Singular => "singular",
            Error::NotConverged { .. } => "not_converged",
            Error::ZeroCell => "zero_cell",
            Error::Degenerate(_) => "degenerate",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::SingleClass => "single_class",
            Error::UnseenCategory { .. } => "unseen_category",
            Error::EmptyGroup(_) => "empty_group",
            Error::ExtractionFailed { .. } => "extraction_failed",
            Error::Transient { .. } => "transient",
            Error::Backend(_) => "backend",
            Error::Infeasible(_) => "infeasible",
            Error::Calibration(_) => "calibration",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
