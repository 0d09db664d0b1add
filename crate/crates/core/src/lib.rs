//! Multiscale tangent statistics, center-of-mass plane fitting, coherent
//! collections of balls and planes, and the Reifenberg-type parameterization
//! map on weighted point clouds sampling `n`-dimensional sets in `R^(n+d)`.

pub mod accept;
pub mod analysis;
pub mod ccbp;
pub mod error;
pub mod generate;
pub mod geometry;
pub mod index;
pub mod io;
pub mod linalg;
pub mod param;
pub mod poincare;
pub mod planefit;
pub mod tolerance;

#[cfg(test)]
mod invariants;

pub use error::{Error, Result};
pub use geometry::{frobenius_distance, plane_distance_local, projection_matrix, AffinePlane, ProjMatrix, WeightedCloud};
pub use index::{ball_query, BallHits, IndexedCloud, SpatialIndex};
