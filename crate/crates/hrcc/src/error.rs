use std::fmt;
use std::io;

/// Errors from configuration, file handling and the core library.
#[derive(Debug)]
pub enum Error {
    /// A configuration value is missing, unknown or inconsistent. `path` is
    /// the dotted field path.
    Config { path: String, message: String },
    /// Malformed input data such as a received-vector file.
    Input(String),
    /// Reading or writing a file failed.
    Io { path: String, source: io::Error },
    /// The core library rejected an operation.
    Core(hrcc_core::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad user input rather than a runtime
    /// failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Input(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config { path, message } if path.is_empty() => write!(f, "config: {message}"),
            Error::Config { path, message } => write!(f, "config field `{path}`: {message}"),
            Error::Input(message) => write!(f, "input: {message}"),
            Error::Io { path, source } => write!(f, "{path}: {source}"),
            Error::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Core(e) => Some(e),
            _ => None,
        }
    }
}

impl From<hrcc_core::Error> for Error {
    fn from(e: hrcc_core::Error) -> Self {
        Error::Core(e)
    }
}
