use std::path::PathBuf;

use sleepstage::ErrorClass;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: sleepstage::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },

    #[error("ingest stored {stored} record(s) and rejected {rejected}; see {}", ledger.display())]
    PartialIngest {
        stored: usize,
        rejected: usize,
        ledger: PathBuf,
    },

    #[error("report error: missing report files: {}", .0.join(", "))]
    MissingReports(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Stage { source, .. } => match source.class() {
                ErrorClass::Numerical => EXIT_NUMERICAL,
                ErrorClass::Data => EXIT_DATA,
            },
            CliError::Io { .. } | CliError::Artifact { .. } | CliError::PartialIngest { .. } => EXIT_DATA,
            CliError::MissingReports(_) => EXIT_DATA,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Tags a library error with the pipeline stage that raised it.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for sleepstage::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
