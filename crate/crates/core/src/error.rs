use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid configuration or model (empty class list, bad
    /// probabilities, out-of-range parameters).
    #[error("config error: {0}")]
    Config(String),

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("confidence level {0} outside (0, 1]")]
    Confidence(f64),

    #[error("test statistic undefined on an empty dataset")]
    UndefinedStatistic,

    #[error("instance generation failed after {attempts} attempts: {diagnostics}")]
    Generation { attempts: usize, diagnostics: String },

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by the user's configuration rather than by a
    /// failed run. The CLI maps these to exit status 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Confidence(_) | Error::UnknownSuite(_) | Error::Parse { .. }
        )
    }
}

pub(crate) fn check_confidence(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Confidence(delta))
    }
}
