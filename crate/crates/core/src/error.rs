use std::path::PathBuf;

use crate::engine::OuterRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    /// A non-finite iterate appeared. `trace` holds the outer iterations that
    /// completed before the failure.
    #[error("{stage} step diverged at outer iteration {outer}, inner iteration {inner}")]
    Diverged {
        stage: &'static str,
        outer: usize,
        inner: usize,
        trace: Vec<OuterRecord>,
    },

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(what: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
