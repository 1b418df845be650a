use std::path::PathBuf;

use thiserror::Error;

use crate::ingest::RejectReason;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The invoice has no payment date, so its outcome is not observable yet.
    #[error("invoice `{0}` is censored: no payment date recorded")]
    Censored(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row} rejected: {reason}")]
    InvalidRow { row: usize, reason: RejectReason },

    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),

    #[error("insufficient horizon: {0}")]
    Horizon(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("loss became non-finite at iteration {0}; use a smaller learning rate")]
    Diverged(usize),

    #[error("feature count mismatch: model expects {expected}, row has {got}")]
    FeatureCount { expected: usize, got: usize },

    #[error("feature `{0}` is missing; impute the row before scoring")]
    MissingFeature(&'static str),

    #[error("unsupported model schema_version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u32 },

    #[error("malformed model document: {0}")]
    ModelFormat(String),

    #[error("AUC is undefined: {0}")]
    UndefinedAuc(&'static str),

    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),

    #[error("invalid metric input: {0}")]
    Metric(String),

    #[error("the two orders do not rank the same item set")]
    MismatchedItems,

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
