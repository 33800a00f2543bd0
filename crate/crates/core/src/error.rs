use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },

    #[error("class index {class} out of range for {num_classes} classes")]
    InvalidClass { class: usize, num_classes: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("inconsistent series lengths: expected {expected}, found {found}")]
    InconsistentLengths { expected: usize, found: usize },

    #[error("occlusion window {window} exceeds dimension {dim}")]
    WindowTooLarge { window: usize, dim: usize },

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("attribution too short: {0} coordinates after exclusions")]
    TooShort(usize),

    #[error("attribution is identically zero")]
    AllZeroAttribution,

    #[error("ragged rows: line {line} has {found} values, expected {expected}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric value {value:?} on line {line}")]
    NonNumeric { line: usize, value: String },

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
