use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The path is shorter than one spatial step. Carries the arc length so
    /// callers can decide how to treat near-stationary recordings.
    #[error("sequence {sequence_id}: arc length {arc_length:.3} m is shorter than the spacing {delta_d} m")]
    DegenerateModel {
        sequence_id: String,
        arc_length: f64,
        delta_d: f64,
    },

    #[error("unknown sequence: {0}")]
    UnknownSequence(String),

    #[error("pair ({snowy_id}, {clear_id}): {source}")]
    Pair {
        snowy_id: String,
        clear_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid decision: {0}")]
    InvalidDecision(String),

    #[error("{snowy_id} is already decided as {existing}")]
    Conflict { snowy_id: String, existing: String },

    #[error("unsupported split fraction {0}")]
    UnsupportedFraction(f64),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0} match outcome(s) still need review")]
    PendingReviews(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate sequence id {0}")]
    DuplicateSequence(String),

    #[error("{path}:{line}: timestamp not strictly increasing at frame position {position}")]
    NonMonotoneTimestamps {
        path: PathBuf,
        line: u64,
        position: usize,
    },

    #[error("{path}: schema version {found} is not supported (expected {expected}); upgrade required")]
    UpgradeRequired {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
