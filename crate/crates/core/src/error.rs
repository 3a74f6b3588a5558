use thiserror::Error;

use crate::models::ModelKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("index {index} out of range for feature `{feature}` (vocabulary size {vocab})")]
    IndexOutOfRange {
        feature: String,
        index: usize,
        vocab: usize,
    },

    #[error("non-finite value produced by node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },

    #[error("unknown model kind `{0}`; valid kinds: {valid}", valid = ModelKind::names().join(", "))]
    UnknownModelKind(String),

    #[error("model kind `{kind}` requires field `{field}`")]
    MissingField { kind: &'static str, field: &'static str },

    #[error("model kind `{kind}` does not use field `{field}`")]
    UnexpectedField { kind: &'static str, field: &'static str },

    #[error("scenario id {id} out of range for {count} scenarios")]
    ScenarioOutOfRange { id: usize, count: usize },

    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("statistics error: {0}")]
    Stats(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
