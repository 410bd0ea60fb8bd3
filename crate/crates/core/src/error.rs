use thiserror::Error;

use crate::fem::FemError;
use crate::linsolve::SolveError;
use crate::mesh::MeshError;

/// Broad failure classes; the command-line driver maps them to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Hypothesis,
    Solver,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("case violation: {0}")]
    Case(String),
    #[error("modulated solve failed at k = ({kx}, {ky}), phase = {phase}: {source}")]
    Sweep {
        kx: f64,
        ky: f64,
        phase: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Mesh(MeshError::Io(_)) => ErrorKind::Io,
            Error::Mesh(_) | Error::Fem(_) | Error::Config(_) | Error::Json { .. } => ErrorKind::Validation,
            Error::Hypothesis(_) | Error::Case(_) => ErrorKind::Hypothesis,
            Error::Solve(_) => ErrorKind::Solver,
            Error::Sweep { source, .. } => source.kind(),
            Error::Io { .. } | Error::Csv(_) => ErrorKind::Io,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
