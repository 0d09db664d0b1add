use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid plane: {0}")]
    InvalidPlane(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("plane does not meet the closed ball (distance {distance:.6e} > radius {radius:.6e})")]
    PlaneMissesBall { distance: f64, radius: f64 },

    #[error("degenerate neighborhood: {0}")]
    DegenerateNeighborhood(String),

    #[error("eigengap too small: gap {gap:.3e} below threshold {threshold:.3e}")]
    EigengapTooSmall { gap: f64, threshold: f64 },

    #[error("ball of radius {radius} holds no usable samples")]
    EmptyBall { radius: f64 },

    #[error("operation requires codimension 1, cloud has codimension {0}")]
    CodimensionNotOne(usize),

    #[error("normal orientation failed between samples {i} and {j} (inner product {inner:.3e})")]
    OrientationFailure { i: usize, j: usize, inner: f64 },

    #[error("matrix is not symmetric (defect {0:.3e})")]
    NotSymmetric(f64),

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("perturbation {delta:.4e} exceeds admissible bound {delta0:.4e}")]
    DeltaTooLarge { delta: f64, delta0: f64 },

    #[error("eigenvalue {value:.6e} at position {position} violates its band")]
    SplitViolation { position: usize, value: f64 },

    #[error("no witness off the subspace (best distance {best:.4e}, required {required:.4e})")]
    NoWitness { best: f64, required: f64 },

    #[error("subspace dimension {k} must be at most {max}")]
    SubspaceTooLarge { k: usize, max: usize },

    #[error("vector is not in the span (residual {residual:.3e})")]
    NotInSpan { residual: f64 },

    #[error("spanning system is ill conditioned: {0}")]
    IllConditioned(String),

    #[error("working region holds no samples")]
    EmptyRegion,

    #[error("snap ball around net point {node} at level {level} holds no sample")]
    SnapFailed { level: usize, node: usize },

    #[error("coincident sample pair ({0}, {1})")]
    DegeneratePair(usize, usize),

    #[error("neighbor graph is disconnected (component sizes {sizes:?})")]
    Disconnected { sizes: Vec<usize> },

    #[error("vertex {0} has no neighbors")]
    IsolatedVertex(usize),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("gradient average vanishes but the function is not constant on the ball")]
    ZeroGradientNonconstant,

    #[error("bad generator spec: {0}")]
    BadSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
