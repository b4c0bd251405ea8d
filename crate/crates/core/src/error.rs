use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line count mismatch: {left} has {left_lines} lines, {right} has {right_lines}")]
    LineCountMismatch {
        left: String,
        left_lines: usize,
        right: String,
        right_lines: usize,
    },

    #[error("sample {0} has an empty source or target side")]
    EmptyLine(usize),

    #[error("{path}: input is not valid UTF-8")]
    InvalidEncoding { path: PathBuf },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("token {token:?} of sample {id} is missing from the {side} frequency table")]
    UnknownWord {
        id: usize,
        side: &'static str,
        token: String,
    },

    #[error("line {line}: cannot parse {text:?} as a number")]
    ParseError { line: usize, text: String },

    #[error("line {line}: score {value} outside (0, 1]")]
    OutOfRange { line: usize, value: f64 },

    #[error("difficulty value for sample {0} is not finite")]
    NonFinite(usize),

    #[error("cannot form {k} classes from {distinct} distinct values")]
    TooManyClasses { k: usize, distinct: usize },

    #[error("shard {0} would be empty")]
    DegenerateShard(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("learner failed at batch {batch_id}: {message}")]
    LearnerFailure { batch_id: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
