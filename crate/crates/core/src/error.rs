use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown stop `{0}`")]
    UnknownStop(String),

    #[error("unknown line `{0}`")]
    UnknownLine(String),

    #[error("binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("no route assignment exists for demand `{0}`")]
    NoCandidates(String),

    #[error("every candidate set is a singleton, the chain cannot move")]
    FrozenChain,

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("{0}")]
    Unreachable(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("evaluation: {0}")]
    Eval(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// 1-based line number of a byte offset.
pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}
