use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("duplicate tap offset {0}")]
    DuplicateOffset(i64),
    #[error("node count must be positive")]
    EmptyNodeSet,
    #[error("frequency grid must have at least one point")]
    EmptyGrid,
    #[error("aliasing: grid of {grid} points cannot resolve a window of length {length}")]
    Aliasing { grid: usize, length: usize },
    #[error("grid of {grid} points is too small, need at least {required}")]
    GridTooSmall { grid: usize, required: usize },
    #[error("frequency grids or tables do not match")]
    GridMismatch,
    #[error("frequency {0} is not a grid point")]
    OffGrid(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("eigenvalue solver did not converge")]
    EigenSolverFailed,
    #[error("eigenvalue {eigenvalue} lies within {distance:e} of the contour")]
    EigenvalueOnContour { eigenvalue: num_complex::Complex64, distance: f64 },
    #[error("contour encloses no eigenvalue")]
    EmptyContour,
    #[error("resolvent is singular at contour node {0}")]
    SingularResolvent(num_complex::Complex64),
    #[error("contour for region {region} is too close to the spectrum at grid index {index}")]
    ContourTooClose { region: String, index: usize },
    #[error(
        "branch tracking failed at grid index {index} (jump {jump:e} vs gap {gap:e}); retry with grid {suggested_grid}"
    )]
    TrackingFailure { index: usize, jump: f64, gap: f64, suggested_grid: usize },
    #[error("branch count changed from {expected} to {found} at grid index {index}")]
    BranchCountChanged { index: usize, expected: usize, found: usize },
    #[error("branch index {index} out of range ({count} branches)")]
    BranchOutOfRange { index: usize, count: usize },
    #[error("cluster {0} does not exist")]
    UnknownCluster(usize),
    #[error("cluster-selected pieces need a region set")]
    MissingRegions,
    #[error("multiplier is not finite at branch {branch}, grid index {index}")]
    NonFiniteMultiplier { branch: usize, index: usize },
    #[error("nonzero nilpotent at branch {branch}, grid index {index}, but the piece has no derivative")]
    MissingDerivative { branch: usize, index: usize },
    #[error("piece '{0}' is not holomorphic; the contour path needs holomorphic pieces")]
    NonHolomorphic(String),
    #[error("quadrature needs at least {min} nodes, got {got}")]
    InvalidQuadrature { min: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
