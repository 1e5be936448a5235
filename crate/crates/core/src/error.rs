use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}: {reason}")]
    MalformedRow {
        path: String,
        row: usize,
        reason: String,
    },

    #[error("duplicate id `{0}` within split")]
    DuplicateId(String),

    #[error("expected {expected} grades, got {got}")]
    GradeCount { expected: usize, got: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("vocabulary cap {cap} cannot hold {needed} reserved and single-character tokens")]
    VocabCapTooSmall { cap: usize, needed: usize },

    #[error("malformed vocabulary file: {0}")]
    MalformedVocab(String),

    #[error("edit region not found in input `{0}`")]
    EditRegionNotFound(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("token id {id} out of range for vocabulary of {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },

    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("class index {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },

    #[error("backward called on a node that does not depend on any trainable parameter")]
    DetachedNode,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("id mismatch while scoring: {0}")]
    IdMismatch(String),

    #[error("{path}: line {line}: {reason}")]
    MalformedPrediction {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
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

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
