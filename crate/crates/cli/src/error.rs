use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] hetfp_core::Error),

    #[error("seed {seed}: {source} (state dumped to {})", dump.display())]
    Violation { seed: u64, dump: PathBuf, source: hetfp_core::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use hetfp_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Write { .. } => EXIT_USAGE,
            CliError::Config(_) | CliError::Read { .. } => EXIT_VALIDATION,
            CliError::Core(e) => match e {
                E::Solver { .. } | E::NonConvergence { .. } | E::Invariant { .. } => EXIT_NUMERICAL,
                E::Parameter(_) | E::InvalidGame(_) | E::Dimension(_) | E::MismatchedExponents(..) | E::Format(_) => {
                    EXIT_VALIDATION
                }
            },
            CliError::Violation { .. } => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn write<E: Into<io::Error>>(path: impl Into<PathBuf>) -> impl FnOnce(E) -> CliError {
        let path = path.into();
        move |source| CliError::Write { path, source: source.into() }
    }

    pub(crate) fn read(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Read { path, source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
