use std::path::PathBuf;

/// Errors produced by the library.
///
/// The variants map onto the process exit codes used by the CLI: invalid
/// configuration is a usage error, problems with the input table are data
/// errors, and optimizer breakdowns are numerical errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The input file could not be interpreted as a categorical dataset.
    #[error("data error: {0}")]
    Data(String),

    /// A precondition on an operation or configuration was violated.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// An optimizer failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
