use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solvers, parsers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("label error on line {line}: {label:?} is not +1 or -1")]
    Label { line: usize, label: String },

    #[error("truncated or malformed input at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },

    #[error("unsupported format version {found:?} (expected {expected:?})")]
    UnsupportedVersion { found: String, expected: String },

    #[error("index {index} out of range for {len} elements")]
    OutOfBounds { index: usize, len: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("no active examples to mimic: the dense classifier is wrong on every point")]
    NothingToMimic,

    #[error("did not reach objective {epsilon} within {iters} iterations (best {best})")]
    NonConvergence { iters: usize, epsilon: f64, best: f64 },

    #[error("infeasible projection: {0}")]
    Infeasible(String),

    #[error("dimension {d} exceeds the dense limit {limit}; use a streaming solver")]
    TooLarge { d: usize, limit: usize },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
