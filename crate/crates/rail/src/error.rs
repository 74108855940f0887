use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RailError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(rail_core::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T, E = RailError> = std::result::Result<T, E>;

impl RailError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RailError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 schema, 4 numerical, 1 anything
    /// else.
    pub fn exit_code(&self) -> i32 {
        use rail_core::Error as E;
        match self {
            RailError::Config(_) => 2,
            RailError::Schema(_) => 3,
            RailError::Numerical(_) => 4,
            RailError::Core(e) => match e {
                E::Config(_) | E::Infeasible(_) => 2,
                E::Dimension { .. } => 3,
                E::Numerical(_) | E::NonFiniteAction { .. } => 4,
                E::UnknownVehicle(_) | E::EmptyBatch(_) => 1,
            },
            RailError::Io { .. } | RailError::Other(_) => 1,
        }
    }
}

impl From<rail_core::Error> for RailError {
    fn from(e: rail_core::Error) -> Self {
        RailError::Core(e)
    }
}

impl From<serde_json::Error> for RailError {
    fn from(e: serde_json::Error) -> Self {
        RailError::Schema(e.to_string())
    }
}

impl From<csv::Error> for RailError {
    fn from(e: csv::Error) -> Self {
        RailError::Schema(e.to_string())
    }
}
