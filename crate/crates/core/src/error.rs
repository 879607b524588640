use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation and reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sampling violation: |L| = {distance} m exceeds {bound} m for a {padded_size}-pixel window")]
    SamplingViolation {
        distance: f64,
        bound: f64,
        padded_size: usize,
    },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("negative intensity {value} at pixel ({row}, {col})")]
    NegativeIntensity { row: usize, col: usize, value: f64 },

    #[error("SLM calibration missing or malformed: {0}")]
    CalibrationMissing(String),

    #[error("at least two frames are required, got {0}")]
    InsufficientFrames(usize),

    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error("unknown object class `{0}`")]
    UnknownClass(String),

    #[error("split `{0}` is missing from the dataset")]
    SplitMissing(String),

    #[error("pairing error: {0}")]
    PairingError(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("{0} already exists; pass --force to overwrite")]
    AlreadyExists(PathBuf),

    #[error("malformed array file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("checksum mismatch for {path}: manifest {expected}, file {actual}")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
