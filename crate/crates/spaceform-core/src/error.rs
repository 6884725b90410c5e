use thiserror::Error;

/// Errors raised by the geometry engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid too coarse along axis {axis}: {n} nodes, need at least {min}")]
    GridTooCoarse { axis: usize, n: usize, min: usize },
    #[error("{name} drifts by {drift:e} across the grid (tolerance {tol:e})")]
    NotAFirstIntegralSolution { name: String, drift: f64, tol: f64 },
    #[error("degenerate triple at node {index:?}: some v_i vanishes")]
    DegenerateTriple { index: [usize; 3] },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("negative radicand for v_{j} at node {index:?}")]
    BranchViolation { j: usize, index: [usize; 3] },
    #[error("coincident principal curvatures at node {index:?}")]
    UmbilicSet { index: [usize; 3] },
    #[error("non-finite state at node {index:?}")]
    NonFiniteState { index: [usize; 3] },
    #[error("initial constraints cannot be satisfied: {0}")]
    ConstraintUnsatisfiable(String),
    #[error("phi vanishes ({value:e})")]
    SingularPhi { value: f64 },
    #[error("psi vanishes ({value:e})")]
    SingularPsi { value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("every node is masked")]
    EmptyDomain,
    #[error("operation requires c != 0")]
    FlatAmbientUnsupported,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("denominator vanishes at u = {at:?}")]
    SingularDenominator { at: [f64; 3] },
    #[error("profile meets the rotation axis")]
    SingularOrbit,
    #[error("degenerate first fundamental form at node {index:?}")]
    DegenerateMetric { index: [usize; 3] },
    #[error("coordinates are not principal at node {index:?} (off-diagonal {offdiag:e})")]
    NonHolonomicSample { index: [usize; 3], offdiag: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
