use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Input(String),
    #[error("{path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("manifest mismatch: {0}")]
    Manifest(String),
    #[error(transparent)]
    Model(#[from] hint_core::Error),
    #[error("{0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// 2 for problems with user input, 1 for internal failures.
    pub fn exit_code(&self) -> i32 {
        use hint_core::Error as M;
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::Input(_) | Error::Checkpoint { .. } | Error::Manifest(_) => 2,
            Error::Model(
                M::InvalidArgument(_)
                | M::Smiles { .. }
                | M::UnknownCode(_)
                | M::OntologyCycle(_)
                | M::MissingSentenceVector(_)
                | M::Empty(_)
                | M::Metric(_)
                | M::UnknownOp(_),
            ) => 2,
            Error::Model(_) | Error::Internal(_) => 1,
        }
    }
}
