use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("solver state error: {0}")]
    State(String),

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while decoding IDX containers. Each variant names the header
/// field or section that was malformed.
#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{file}: bad magic number 0x{found:08x}, expected 0x{expected:08x}")]
    Magic {
        file: String,
        expected: u32,
        found: u32,
    },

    #[error("{file}: truncated while reading {field}")]
    Truncated { file: String, field: &'static str },

    #[error("{file}: {field} is {found}, expected {expected}")]
    Dimension {
        file: String,
        field: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("{file}: label {value} at index {index} is outside 0..=9")]
    Label {
        file: String,
        index: usize,
        value: u8,
    },

    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint parse error: {0}")]
    Parse(String),

    #[error("unsupported checkpoint version {found} (this build reads version {supported})")]
    Version { found: u64, supported: u32 },

    #[error("segment `{segment}` has shape {found:?} in the checkpoint, model expects {expected:?}")]
    SegmentShape {
        segment: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("segment `{0}` missing from checkpoint")]
    MissingSegment(String),
}
