use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A prior, config file or hyperparameter is malformed.
    #[error("configuration error: {0}")]
    Config(String),
    /// A graph or table violates a structural invariant (cycle, empty parent, ...).
    #[error("structural error: {0}")]
    Structural(String),
    /// A caller passed arguments outside an operation's domain.
    #[error("usage error: {0}")]
    Usage(String),
    /// Tables were requested out of dependency order.
    #[error("orchestration error: {0}")]
    Orchestration(String),
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
