use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("mesh is not watertight: {open_edges} edges are not shared by exactly two triangles")]
    NonWatertight { open_edges: usize },

    #[error("voxelization produced no occupied voxels")]
    EmptyOccupancy,

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("matrix of size {size} exceeds the dense limit of {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(
        "panel resolution too coarse: kappa*h = {kappa_h:.3} >= 1; use a finer grid, more panel subdivision, or a lower frequency"
    )]
    ResolutionViolation { kappa_h: f64 },

    #[error("singular boundary system at omega = {omega:.6e} rad/s (possible fictitious frequency); perturb the frequency slightly and retry")]
    SingularBoundarySystem { omega: f64 },

    #[error("field point at distance {distance:.3e} m is closer than {min_distance:.3e} m to the surface")]
    PointTooClose { distance: f64, min_distance: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::SingularBoundarySystem { .. }
        )
    }
}
