use std::io;

use thiserror::Error;

/// Errors produced by the volstc engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no readings")]
    NoReadings,

    #[error("duplicate reading for station `{station}` at step {step}")]
    DuplicateReading { station: String, step: usize },

    #[error("reading references unknown station `{0}`")]
    UnknownStation(String),

    #[error("duplicate station id `{0}`")]
    DuplicateStation(String),

    #[error("timestamp {timestamp} is not aligned to dt={dt}s (offset {offset:.3}s)")]
    MisalignedTimestamp {
        timestamp: String,
        dt: u32,
        offset: f64,
    },

    #[error("malformed input at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("singular kriging system: stations {0} and {1} share a position")]
    SingularKriging(String, String),

    #[error("kriging system is numerically singular")]
    IllConditioned,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no valid slices: every time step has fewer than {0} samples")]
    NoValidSlices(usize),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("zero-area viewport")]
    EmptyViewport,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
