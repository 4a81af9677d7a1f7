use thiserror::Error;

/// Errors raised by the Schur, CMV, walk and index machinery.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Schur step is degenerate: 1 - conj(alpha) * f vanishes")]
    DivisionDegenerate,

    #[error("inverse Schur step is degenerate at the boundary")]
    BoundaryDegenerate,

    #[error("square-root branch is ambiguous at z = {re} + {im}i")]
    BranchAmbiguous { re: f64, im: f64 },

    #[error("gap closed at {point:+}: {detail}")]
    GapClosed { point: i8, detail: String },

    #[error("1 - z f(z) is singular (mass point)")]
    MassPointSingular,

    #[error("inconsistent window: {0}")]
    InconsistentWindow(String),

    #[error("singular linear solve")]
    SingularSolve,

    #[error("dimension {dim} exceeds the dense cap {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },

    #[error("angle {value} at {location} is outside (-pi/2, pi/2)")]
    AngleOutOfRange { location: String, value: f64 },

    #[error("coin constraint violated: {identity} off by {residual:e}")]
    CoinConstraintViolated { identity: &'static str, residual: f64 },

    #[error("admissibility bound violated: sin(eps/2) + sin(eps'/2) = {value} >= 1/sqrt(2)")]
    BoundViolated { value: f64 },

    #[error("inconsistent symmetry representation: {0}")]
    InconsistentRepresentation(String),

    #[error("symmetry violated: residual {residual:e}")]
    SymmetryViolated { residual: f64 },

    #[error("window did not converge: {0}")]
    WindowNotConverged(String),

    #[error("subspace is not cyclic: Krylov rank {rank} < {dim}")]
    NotCyclic { rank: usize, dim: usize },

    #[error("no eigenvalue within the candidate threshold of {point:+}")]
    NoCandidate { point: i8 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
