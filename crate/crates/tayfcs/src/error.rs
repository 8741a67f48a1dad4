use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tayfcs_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Csv { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("provenance: {0}")]
    Provenance(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 config or provenance, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        use tayfcs_core::Error as C;
        match self {
            Error::Config(_) | Error::Provenance(_) => 2,
            Error::Core(C::InvalidConfig(_) | C::InvalidRatios(_) | C::SizeGuard(_) | C::DuplicateCombination(_)) => 2,
            Error::Core(C::NonFinite(_)) => 4,
            _ => 3,
        }
    }
}
