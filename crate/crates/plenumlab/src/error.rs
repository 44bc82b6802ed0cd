use std::path::PathBuf;

use plenumlab_core::autodiff::AutodiffError;
use plenumlab_core::dataprep::DataError;
use plenumlab_core::geometry::GeometryError;
use plenumlab_core::meshstudy::MeshStudyError;
use plenumlab_core::models::ModelError;
use plenumlab_core::probes::ProbeError;
use plenumlab_core::solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config not found: {}", .0.display())]
    ConfigNotFound(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad magic in {}: expected {expected:?}", path.display())]
    BadMagic { path: PathBuf, expected: &'static str },
    #[error("{} is truncated", .0.display())]
    TruncatedFile(PathBuf),
    #[error("dimension mismatch in {}: {what}", path.display())]
    DimensionMismatch { path: PathBuf, what: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    MeshStudy(#[from] MeshStudyError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("{0}")]
    Verification(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short label printed in front of the diagnostic.
    pub fn category(&self) -> &'static str {
        match self {
            Error::ConfigNotFound(_) | Error::Usage(_) => "usage",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::BadMagic { .. } | Error::TruncatedFile(_) | Error::DimensionMismatch { .. } | Error::Format(_) => "format",
            Error::Geometry(_) => "geometry",
            Error::Solver(_) => "solver",
            Error::Probe(_) => "probes",
            Error::Data(_) => "data",
            Error::Model(_) => "model",
            Error::MeshStudy(_) => "meshstudy",
            Error::Autodiff(_) => "autodiff",
            Error::Verification(_) => "verification",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigNotFound(_) | Error::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
