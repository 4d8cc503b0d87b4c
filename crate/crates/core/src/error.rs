use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("I/O error: {0}")]
    RawIo(#[from] io::Error),

    #[error("line {line}: malformed event: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: event {event_id}: invalid field `{field}` ({rule})")]
    InvalidEvent {
        line: usize,
        event_id: i64,
        field: String,
        rule: &'static str,
    },

    #[error("corrupt dataset: {0}")]
    Corrupt(String),

    #[error("row group {index} out of range (dataset has {count})")]
    RowGroupOutOfRange { index: usize, count: usize },

    #[error("error reading row group {index} of {path}: {message}")]
    RowGroupRead {
        path: PathBuf,
        index: usize,
        message: String,
    },

    #[error("unknown column path `{0}`")]
    UnknownColumn(String),

    #[error("column `{0}` was not part of the projection")]
    NotProjected(String),

    #[error("invalid scale factor {0}: must be 2^i with i in [-16, 7]")]
    InvalidScaleFactor(String),

    #[error("cannot shrink an empty dataset")]
    EmptyDataset,

    #[error("invalid histogram spec: {0}")]
    InvalidHistogramSpec(String),

    #[error("histogram spec mismatch: {0:?} vs {1:?}")]
    SpecMismatch(
        crate::histogram::HistogramSpec,
        crate::histogram::HistogramSpec,
    ),

    #[error("combination arity {0} not supported (expected 2 or 3)")]
    UnsupportedArity(usize),

    #[error("column lengths disagree: {0}")]
    LengthMismatch(String),

    #[error("invariant mass of an empty particle list")]
    EmptyParticleList,

    #[error("unknown query `{0}`")]
    UnknownQuery(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than misuse or environment.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidEvent { .. }
                | Error::Corrupt(_)
                | Error::LengthMismatch(_)
                | Error::RowGroupRead { .. }
        )
    }
}
