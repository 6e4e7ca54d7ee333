use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-manifold edge ({0}, {1}) is shared by more than two faces")]
    NonManifold(usize, usize),

    #[error("inconsistent orientation across edge ({0}, {1})")]
    InconsistentOrientation(usize, usize),

    #[error("degenerate face {0}")]
    DegenerateFace(usize),

    #[error("vertex {0} is not referenced by any face")]
    UnreferencedVertex(usize),

    #[error("transform is singular (det = {0:e})")]
    SingularTransform(f64),

    #[error("degenerate triangle in planar patch")]
    DegenerateTriangle,

    #[error("quadratic fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("pre-metric is degenerate (|det| = {0:e})")]
    DegeneratePreMetric(f64),

    #[error("metric is not positive definite (det = {0:e})")]
    SingularMetric(f64),

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("eigensolver did not converge: {0}")]
    Convergence(String),

    #[error("mesh appears disconnected (lambda_1 = {0:e})")]
    Disconnected(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("query {0} has no relevant items")]
    NoRelevant(usize),

    #[error("invalid correspondence: {0}")]
    InvalidCorrespondence(String),

    #[error("metric space of size {size} exceeds the brute-force cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("transform is not volume preserving (det = {0})")]
    NotVolumePreserving(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Validation,
    Numerical,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::Json(_) => ErrorClass::Input,
            Error::Factorization(_)
            | Error::Convergence(_)
            | Error::Disconnected(_)
            | Error::SingularMetric(_)
            | Error::DegeneratePreMetric(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::NonManifold(..) => "non_manifold",
            Error::InconsistentOrientation(..) => "inconsistent_orientation",
            Error::DegenerateFace(_) => "degenerate_face",
            Error::UnreferencedVertex(_) => "unreferenced_vertex",
            Error::SingularTransform(_) => "singular_transform",
            Error::DegenerateTriangle => "degenerate_triangle",
            Error::InsufficientPoints(_) => "insufficient_points",
            Error::DegeneratePreMetric(_) => "degenerate_pre_metric",
            Error::SingularMetric(_) => "singular_metric",
            Error::Factorization(_) => "factorization",
            Error::Convergence(_) => "convergence",
            Error::Disconnected(_) => "disconnected",
            Error::InsufficientData(_) => "insufficient_data",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NoRelevant(_) => "no_relevant",
            Error::InvalidCorrespondence(_) => "invalid_correspondence",
            Error::SizeCap { .. } => "size_cap",
            Error::NotVolumePreserving(_) => "not_volume_preserving",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Json(_) => "json",
        }
    }
}
