use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector is not a unit vector (norm {0})")]
    NotUnit(f64),

    #[error("zero vector where a nonzero direction is required")]
    ZeroVector,

    #[error("the set is empty")]
    EmptySet,

    #[error("point lies inside the set; nothing to separate")]
    PointInside,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported representation: {0}")]
    Unsupported(String),

    #[error("positivity condition fails: {0}")]
    PositivityFailure(String),

    #[error("radius {radius} is below the minimum {min}")]
    RadiusTooSmall { radius: f64, min: f64 },

    #[error("point lies on or outside the boundary")]
    OnBoundary,

    #[error("coincident points")]
    Coincident,

    #[error("coefficient matrix is not diagonally dominant at node {0}")]
    NotDiagonallyDominant(usize),

    #[error("ellipticity floor violated: minimum eigenvalue {min_eig} < floor {floor}")]
    NotElliptic { min_eig: f64, floor: f64 },

    #[error("solver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
