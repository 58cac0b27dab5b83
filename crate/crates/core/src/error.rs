use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KcError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular Gram matrix (pivot {pivot} at row {row}), increase lambda")]
    SingularGram { row: usize, pivot: f64 },

    #[error("Gram matrix still singular after retrying with lambda {jitter}")]
    SingularAfterRetry { jitter: f64 },

    #[error("dataset needs at least 2 classes, found {0}")]
    TooFewClasses(usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("split leaves an empty part ({part_a} / {part_b} samples)")]
    EmptySplit { part_a: usize, part_b: usize },

    #[error("bad IDX magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("truncated IDX payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("CSV column `{0}` not found")]
    MissingColumn(String),

    #[error("CSV row {row} has {found} fields, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("CSV row {row}, column `{column}`: `{value}` is not numeric")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unknown class label `{0}`")]
    UnknownLabel(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: {source}")]
    ReadFile { path: String, source: io::Error },
}

pub type Result<T> = std::result::Result<T, KcError>;
