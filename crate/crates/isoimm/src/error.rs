use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("finite-difference stencil leaves the grid at {index:?} (axis {axis})")]
    BoundaryStencil { index: Vec<usize>, axis: usize },

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("matrix is not positive-definite{}", match .index {
        Some(i) => format!(" at grid index {i:?}"),
        None => String::new(),
    })]
    NotPositiveDefinite { index: Option<Vec<usize>> },

    #[error("curvature operator is not positive-definite (min eigenvalue {eigenvalue:.3e})")]
    NotPositiveOperator { eigenvalue: f64 },

    #[error("tensor violates curvature symmetries (relative violation {violation:.3e})")]
    NotCurvatureLike { violation: f64 },

    #[error("Weyl part of ln(R) is nonzero (relative norm {norm:.3e}); Gauss equation unsolvable")]
    WeylObstruction { norm: f64 },

    #[error("recovered second fundamental form fails the Codazzi equation (residual {residual:.3e})")]
    CodazziObstruction { residual: f64 },

    #[error("initial gradient violates g^ab h_a h_b < 1 (got {grad_norm_sq:.6})")]
    InvalidSeed { grad_norm_sq: f64 },

    #[error("no grid points found in the level band around h = {level}")]
    EmptyLevelBand { level: f64 },

    #[error("gradient of h degenerate on the level band around h = {level}")]
    DegenerateGradient { level: f64 },

    #[error("metric is not flat to tolerance (residual {residual:.3e})")]
    FlatnessViolation { residual: f64 },

    #[error("coupling matrix delta_mn - h^m_a h^n_b g^ab is singular at {index:?}")]
    SingularCouplingMatrix { index: Vec<usize> },

    #[error("invalid metric spec: {0}")]
    Spec(String),

    #[error("malformed samples file: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
