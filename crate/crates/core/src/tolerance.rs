//! Numerical tolerances and default constants shared across the crate.
//!
//! Everything that acts as a correctness threshold lives here so that a
//! single edit retunes the whole pipeline.

/// Entrywise symmetry defect allowed for a projection matrix.
pub const SYMMETRY: f64 = 1e-10;

/// Symmetry defect accepted by the eigensolver.
pub const EIGEN_SYMMETRY: f64 = 1e-8;

/// `P^2 = P` and `trace P = n` tolerance for exact tangent projections.
pub const IDEMPOTENCE: f64 = 1e-8;

/// Slack on the `[0, 1]` eigenvalue range of averaged projections.
pub const SPECTRUM_SLACK: f64 = 1e-10;

/// Gram matrix deviation from the identity for plane frames.
pub const ORTHONORMAL: f64 = 1e-10;

/// Relative tolerance on the cached total mass of a cloud.
pub const TOTAL_MASS_REL: f64 = 1e-12;

/// Off-diagonal Frobenius mass at which Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;

/// Sweep budget of the cyclic Jacobi solver.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Relative eigengap `(l_n - l_{n+1}) / l_1` below which a PCA tangent is
/// flagged invalid.
pub const TANGENT_GAP: f64 = 1e-6;

/// Relative size of `l_n / l_1` below which the covariance counts as rank
/// deficient.
pub const RANK: f64 = 1e-10;

/// Minimum gap between `|l_n|` and `|l_{n+1}|` of the averaged projection
/// used for center-of-mass plane fitting.
pub const FIT_EIGENGAP: f64 = 0.1;

/// Radius multiplier of the off-plane witness search.
pub const WITNESS_C0: f64 = 1.0 / 50.0;

/// Relative residual allowed when expressing a vector in a spanning system.
pub const SPAN_RESIDUAL: f64 = 1e-8;

/// Normal orientation: smallest inner product tolerated on a graph edge.
pub const FLIP: f64 = 0.0;

/// Maximum tilt (radians) of the perturbed candidate planes in the
/// flatness search.
pub const FLATNESS_TILT: f64 = 0.3;

/// Number of perturbed candidate planes in the flatness search.
pub const FLATNESS_CANDIDATES: usize = 24;

/// Grid points per axis used to sample a plane disk in the flatness search.
pub const FLATNESS_GRID: usize = 15;

/// Levels finer than this multiple of the local sample spacing are dropped.
pub const LEVEL_SPACING_FACTOR: f64 = 3.0;

/// Default tangent radius in units of mean nearest-neighbor spacing.
pub const TANGENT_RADIUS_FACTOR: f64 = 2.0;

/// Default neighbor-graph radius in units of mean nearest-neighbor spacing.
pub const GRAPH_RADIUS_FACTOR: f64 = 1.5;
