use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape disagreement between tensors, naming the offending axis.
    #[error("{op}: dimension mismatch on {axis}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        got: usize,
    },

    /// Invalid configuration value (learning rate, fraction, kernel size, ...).
    #[error("{op}: {msg}")]
    Config { op: &'static str, msg: String },

    /// Class label outside [0, n_classes), naming the batch row it came from.
    #[error("label {label} out of range for {n_classes} classes (row {row})")]
    Label {
        row: usize,
        label: usize,
        n_classes: usize,
    },

    /// No pixel above the foreground threshold.
    #[error("no foreground pixel above threshold {threshold}")]
    NoForeground { threshold: u8 },

    /// Malformed IDX file, naming the byte offset where parsing failed.
    #[error("{path}: bad IDX data at byte {offset}: {msg}")]
    IdxFormat {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    /// Malformed or mismatched weight file, naming the tensor involved.
    #[error("weight file: tensor {tensor}: {msg}")]
    WeightFormat { tensor: String, msg: String },

    /// Malformed image file (PGM codec).
    #[error("{path}: {msg}")]
    ImageFormat { path: PathBuf, msg: String },

    /// Problem ingesting a dataset directory, listing the offending path.
    #[error("ingest {path}: {msg}")]
    Ingest { path: PathBuf, msg: String },

    /// Operation called in the wrong order (e.g. backward before forward).
    #[error("invalid state: {0}")]
    State(&'static str),

    /// Internal consistency failure (indices from a mismatched forward call).
    #[error("internal consistency: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Config {
            op,
            msg: msg.into(),
        }
    }
}
