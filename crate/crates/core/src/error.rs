use thiserror::Error;

use crate::c64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("filter evaluated at pole {pole} (distance {distance:e})")]
    PoleEvaluation { pole: c64, distance: f64 },

    #[error("degenerate inverse image: mu = {mu} coincides with omega0")]
    DegenerateFilter { mu: c64 },

    #[error("root finding failed; residuals {residuals:?}")]
    RootFinding { residuals: Vec<f64> },

    #[error("singular shift z = {z}: {reason}")]
    SingularShift { z: c64, reason: String },

    #[error("matrix is numerically singular (zero pivot in column {pivot})")]
    SingularMatrix { pivot: usize },

    #[error("ill-conditioned system at z = {z}: condition estimate {condition:e}")]
    IllConditioned { z: c64, condition: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("linearly dependent basis: {0}")]
    DependentBasis(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("nothing to refine: all indicators are zero")]
    NothingToMark,

    #[error("no spectrum inside the contour (center {center}, radius {radius})")]
    NoSpectrumInContour { center: c64, radius: f64 },

    #[error("subspace iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged {
        iterations: usize,
        last_change: f64,
        history: Vec<f64>,
    },

    #[error("estimator structure mismatch: {0}")]
    EstimatorMismatch(String),

    #[error("empty set")]
    EmptySet,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
