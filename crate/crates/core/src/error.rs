use std::path::PathBuf;

use crate::fem::{MeshSolution, NewtonDiagnostics};
use crate::mesh::NodalField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Evaluation at (or too close to) a singularity.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input data violates a solvability requirement (p <= 0, non-constant sign, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("linear solver error: {0}")]
    Solver(String),

    #[error("Newton iteration did not converge on mesh {0}")]
    NonConvergence(Box<NonConvergence>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Payload of a failed Newton solve: the last iterate plus whatever mesh
/// levels finished before the failure.
#[derive(Debug)]
pub struct NonConvergence {
    pub level: usize,
    pub reason: String,
    pub last_iterate: NodalField,
    pub diagnostics: NewtonDiagnostics,
    pub completed: Vec<MeshSolution>,
}

impl std::fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "level {}: {}", self.level, self.reason)
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
