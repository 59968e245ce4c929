use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown workload id `{id}`; valid ids are {valid}")]
    UnknownWorkload { id: String, valid: String },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: unsupported or missing header, expected `{expected}`")]
    Header { path: PathBuf, expected: &'static str },

    #[error("every action is masked in state {state}")]
    AllActionsMasked { state: String },

    #[error("{0} requires a non-empty input")]
    Empty(&'static str),

    #[error("jitter is undefined for a series with non-positive mean")]
    NonPositiveMean,

    #[error("previous bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("saved Q-table was built with bands `{saved}`, current config uses `{current}`")]
    BandMismatch { saved: String, current: String },

    #[error("config: {0}")]
    Config(String),

    #[error("reports cover different workloads: `{0}` vs `{1}`")]
    WorkloadMismatch(String, String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
