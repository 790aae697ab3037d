use std::path::PathBuf;

use crate::time::SimTime;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// Invalid scenario, topology, or parameter. Reported before the event loop starts.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric argument outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("runtime fault at {at} while handling {event}: {message}")]
    Runtime {
        at: SimTime,
        event: String,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Domain(_) => 2,
            SimError::Runtime { .. } | SimError::Io { .. } => 3,
        }
    }
}
