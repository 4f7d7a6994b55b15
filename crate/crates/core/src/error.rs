//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("task_id out of range: {0}")]
    TaskOutOfRange(usize),

    #[error("scene infeasible after {0} attempts")]
    SceneInfeasible(usize),

    #[error("expert failure: target not reached within {horizon} steps (scene seed {seed})")]
    ExpertFailure { seed: u64, horizon: usize },

    #[error("controller fault: non-finite action {0:?}")]
    ControllerFault([f64; 2]),

    #[error("controller fault at theta {theta_deg} episode {episode}: {source}")]
    EpisodeFault {
        theta_deg: f64,
        episode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("oracle fault: non-finite function value at coordinate {0}")]
    OracleFault(usize),

    #[error("degenerate vector (norm {0:e})")]
    DegenerateVector(f64),

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("malformed file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::TaskOutOfRange(_) => 2,
            Error::MissingInput(_) | Error::Format { .. } => 3,
            Error::Divergence(_) => 4,
            Error::Io { .. } => 5,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
