use std::path::Path;

use thiserror::Error;
use ttm_core::TtmError;

pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Data(String),

    #[error("fit failed at {0}")]
    Degenerate(TtmError),

    #[error("replay mismatch: {0}")]
    Replay(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Degenerate(_) => EXIT_DEGENERATE,
            CliError::Replay(_) => EXIT_MISMATCH,
            _ => EXIT_DATA,
        }
    }
}

impl From<TtmError> for CliError {
    fn from(e: TtmError) -> Self {
        if e.is_fit_degenerate() {
            CliError::Degenerate(e)
        } else {
            CliError::Data(e.to_string())
        }
    }
}
