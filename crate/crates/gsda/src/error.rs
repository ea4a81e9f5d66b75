use std::path::PathBuf;

/// Errors surfaced by file handling and the command layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: no points", .0.display())]
    EmptyCloud(PathBuf),
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    ModelLoad {
        path: PathBuf,
        #[source]
        source: gsda_core::Error,
    },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] gsda_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for bad input or arguments, 3 for runtime
    /// failures (IO, numerics).
    pub fn exit_code(&self) -> u8 {
        use gsda_core::Error as E;
        match self {
            Error::Parse { .. } | Error::EmptyCloud(_) | Error::Json { .. } | Error::ModelLoad { .. } | Error::Validation(_) => 2,
            Error::Core(E::ConvergenceFailure) | Error::Io { .. } => 3,
            Error::Core(_) => 2,
        }
    }
}
