use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch on {axis} axis: expected {expected}, found {found}")]
    DimensionMismatch {
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{matrix} is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { matrix: String, condition: f64 },

    #[error("degenerate pilots: expanded system has no response along the principal eigenvector")]
    DegeneratePilot,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cell {cell}: {source}")]
    Cell {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_cell(self, cell: usize) -> Self {
        Error::Cell {
            cell,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_trial(self, trial: u64) -> Self {
        Error::Trial {
            trial,
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI: 1 invalid config, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::Config(_) => 1,
            Error::IllConditioned { .. } | Error::DegeneratePilot | Error::Numerical(_) => 2,
            Error::Cell { .. } | Error::Trial { .. } => 2,
            Error::Io { .. } => 3,
        }
    }
}
