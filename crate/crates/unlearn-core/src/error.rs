use thiserror::Error;

/// Errors produced by dataset handling, model math, attacks, and unlearning.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },

    #[error("need at least 2 classes to draw a wrong label, got {class_count}")]
    NoWrongLabel { class_count: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("cannot select {requested} forget samples from {available} training samples")]
    Selection { requested: usize, available: usize },

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("evaluation over an empty confusion matrix")]
    EmptyEval,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
