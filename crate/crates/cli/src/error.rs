use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or knob values. Exit 2.
    #[error("{0}")]
    Config(String),

    /// Errors from the library, classified by kind.
    #[error(transparent)]
    Core(#[from] distemb::Error),

    /// The gradient check ran but did not pass. Exit 4.
    #[error("{0}")]
    CheckFailed(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(distemb::Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(distemb::Error::Json(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_io() => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::CheckFailed(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Prefix bare I/O errors with the path they concern.
pub(crate) fn at(path: &std::path::Path) -> impl Fn(distemb::Error) -> CliError + '_ {
    move |e| match e {
        distemb::Error::Io(io) => {
            let msg = format!("{}: {io}", path.display());
            CliError::Core(distemb::Error::Io(std::io::Error::new(io.kind(), msg)))
        }
        other => CliError::Core(other),
    }
}

pub(crate) fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
