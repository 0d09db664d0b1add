//! Eigenvalue band split of near-projections, center-of-mass plane fitting,
//! and the two auxiliary linear-algebra routines used by the fit: a witness
//! search off low-dimensional subspaces and bounded span coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::{average_projection, TangentField};
use crate::error::{Error, Result};
use crate::geometry::{AffinePlane, ProjMatrix};
use crate::index::IndexedCloud;
use crate::linalg::{self, dot};
use crate::tolerance;

pub use crate::linalg::{symmetric_eigen, SymmetricEigen};

/// Eigenvalues and eigenvectors of a near-projection split into the `n`
/// large and `d` small ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenSplit {
    pub big_values: Vec<f64>,
    pub small_values: Vec<f64>,
    pub big_vectors: Vec<Vec<f64>>,
    pub small_vectors: Vec<Vec<f64>>,
    pub delta: f64,
}

impl EigenSplit {
    pub fn big_lower_bound(&self) -> f64 {
        let dim = self.big_values.len() + self.small_values.len();
        1.0 - dim as f64 * self.delta
    }

    pub fn small_upper_bound(&self) -> f64 {
        let dim = self.big_values.len() + self.small_values.len();
        dim as f64 * self.delta
    }
}

/// Largest admissible perturbation for the band split.
pub fn split_delta0(n: usize, d: usize) -> f64 {
    1.0 / (8.0 * (n + d - 1) as f64)
}

/// Splits the spectrum of a symmetric `l` close to the projection onto the
/// linear part of `v`, with `delta = ||pi_V - l||_op` measured.
pub fn gershgorin_split(l: &DMatrix<f64>, n: usize, d: usize, v: &AffinePlane) -> Result<EigenSplit> {
    if v.dim() != n || v.ambient_dim() != n + d {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.dim(),
        });
    }
    let diff = v.projection_matrix().matrix() - l;
    let delta = linalg::symmetric_op_norm(&diff)?;
    gershgorin_split_with_delta(l, n, d, delta)
}

/// Band split with a caller-certified `delta`.
pub fn gershgorin_split_with_delta(
    l: &DMatrix<f64>,
    n: usize,
    d: usize,
    delta: f64,
) -> Result<EigenSplit> {
    let dim = n + d;
    if l.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: l.nrows(),
        });
    }
    let delta0 = split_delta0(n, d);
    if delta > delta0 {
        return Err(Error::DeltaTooLarge { delta, delta0 });
    }
    let eig = symmetric_eigen(l, tolerance::JACOBI_TOL)?;
    let big = 1.0 - dim as f64 * delta - tolerance::SPECTRUM_SLACK;
    let small = dim as f64 * delta + tolerance::SPECTRUM_SLACK;
    for (position, &value) in eig.values.iter().enumerate() {
        let ok = if position < n {
            value.abs() >= big
        } else {
            value.abs() <= small
        };
        if !ok {
            return Err(Error::SplitViolation { position, value });
        }
    }
    Ok(EigenSplit {
        big_values: eig.values[..n].to_vec(),
        small_values: eig.values[n..].to_vec(),
        big_vectors: (0..n).map(|k| eig.vector(k)).collect(),
        small_vectors: (n..dim).map(|k| eig.vector(k)).collect(),
        delta,
    })
}

/// Center-of-mass plane together with the spectral data behind it.
#[derive(Debug, Clone)]
pub struct PlaneFit {
    pub plane: AffinePlane,
    pub averaged: ProjMatrix,
    /// Eigenvalues of the averaged projection, by decreasing modulus.
    pub eigenvalues: Vec<f64>,
    /// The discarded (small) eigenvectors; orthogonal to the plane.
    pub normals: Vec<Vec<f64>>,
}

/// Plane through the mass centroid of `B(x, r)` spanned by the top-`n`
/// eigenvectors of the averaged projection over `B(x, lambda r)`.
pub fn fit_plane_t1(
    ic: &IndexedCloud,
    field: &TangentField,
    x: &[f64],
    r: f64,
    lambda: f64,
) -> Result<AffinePlane> {
    Ok(fit_plane(ic, field, x, r, lambda)?.plane)
}

pub fn fit_plane(
    ic: &IndexedCloud,
    field: &TangentField,
    x: &[f64],
    r: f64,
    lambda: f64,
) -> Result<PlaneFit> {
    let n = ic.dim_intrinsic();
    let hits = ic.ball(x, r);
    if hits.indices.is_empty() {
        return Err(Error::EmptyBall { radius: r });
    }
    let mut centroid = vec![0.0; ic.dim_ambient()];
    for &j in &hits.indices {
        linalg::add_scaled(&mut centroid, ic.cloud.weight(j) / hits.mass, ic.point(j));
    }
    let averaged = average_projection(ic, field, x, lambda * r)?;
    let eig = symmetric_eigen(averaged.matrix(), tolerance::JACOBI_TOL)?;
    let gap = eig.values[n - 1].abs() - eig.values.get(n).map(|v| v.abs()).unwrap_or(0.0);
    if gap < tolerance::FIT_EIGENGAP {
        return Err(Error::EigengapTooSmall {
            gap,
            threshold: tolerance::FIT_EIGENGAP,
        });
    }
    let frame: Vec<Vec<f64>> = (0..n).map(|k| eig.vector(k)).collect();
    let normals = (n..ic.dim_ambient()).map(|k| eig.vector(k)).collect();
    Ok(PlaneFit {
        plane: AffinePlane::new(centroid, frame)?,
        averaged,
        eigenvalues: eig.values,
        normals,
    })
}

/// A sample `x` of `B(x0, r0)` at distance at least `11 c0 r0` from the
/// subspace `v` with `B(x, c0 r0)` inside `B(x0, 2 r0)`. The farthest
/// qualifying sample is returned (smallest index on ties).
pub fn find_point_off_subspace(
    ic: &IndexedCloud,
    x0: &[f64],
    r0: f64,
    v: &AffinePlane,
    c0: f64,
) -> Result<usize> {
    let max = ic.dim_intrinsic() - 1;
    if v.dim() > max {
        return Err(Error::SubspaceTooLarge { k: v.dim(), max });
    }
    let required = 11.0 * c0 * r0;
    let mut best: Option<(usize, f64)> = None;
    let mut best_any = 0.0f64;
    for j in ic.index.within(x0, r0) {
        let p = ic.point(j);
        let dv = v.distance(p);
        best_any = best_any.max(dv);
        let inside = linalg::dist(p, x0) + c0 * r0 <= 2.0 * r0;
        if dv >= required && inside && best.map(|(_, b)| dv > b).unwrap_or(true) {
            best = Some((j, dv));
        }
    }
    best.map(|(j, _)| j).ok_or(Error::NoWitness {
        best: best_any,
        required,
    })
}

/// Quantitative independence bounds for a spanning system.
#[derive(Debug, Clone, Copy)]
pub struct SpanBounds {
    /// Lower bound `k0` on `|u_1|` and on each `d(u_j, span(u_1..u_{j-1}))`, in units of `R`.
    pub lower: f64,
    /// Upper bound `K0` on every `|u_j|`, in units of `R`.
    pub upper: f64,
}

/// Coefficients `beta` with `v = sum beta_j u_j`, after checking the
/// independence bounds of the system at scale `scale`.
pub fn span_coefficients(us: &[Vec<f64>], v: &[f64], scale: f64, bounds: SpanBounds) -> Result<Vec<f64>> {
    check_independence(us, scale, bounds)?;
    let dim = v.len();
    let k = us.len();
    let u = DMatrix::from_fn(dim, k, |r, c| us[c][r]);
    let rhs = DVector::from_column_slice(v);
    let gram = u.transpose() * &u;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("Gram matrix is not positive definite".into()))?;
    let beta = chol.solve(&(u.transpose() * &rhs));
    let residual = (&u * &beta - &rhs).norm();
    if residual > tolerance::SPAN_RESIDUAL * rhs.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotInSpan { residual });
    }
    Ok(beta.iter().copied().collect())
}

fn check_independence(us: &[Vec<f64>], scale: f64, bounds: SpanBounds) -> Result<()> {
    if us.is_empty() {
        return Err(Error::IllConditioned("empty system".into()));
    }
    if !(0.0 < bounds.lower && bounds.lower < bounds.upper) {
        return Err(Error::IllConditioned(format!(
            "bounds require 0 < {} < {}",
            bounds.lower, bounds.upper
        )));
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (j, u) in us.iter().enumerate() {
        let len = linalg::norm(u);
        if len > bounds.upper * scale {
            return Err(Error::IllConditioned(format!(
                "|u_{}| = {len:.4e} exceeds {:.4e}",
                j + 1,
                bounds.upper * scale
            )));
        }
        let mut w = u.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                linalg::add_scaled(&mut w, -c, b);
            }
        }
        let off = linalg::normalize(&mut w);
        if off < bounds.lower * scale {
            return Err(Error::IllConditioned(format!(
                "u_{} lies within {off:.4e} of the span of its predecessors",
                j + 1
            )));
        }
        basis.push(w);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WeightedCloud;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(half: usize, spacing: f64) -> IndexedCloud {
        let mut coords = Vec::new();
        for i in 0..=2 * half {
            for j in 0..=2 * half {
                coords.extend([
                    (i as f64 - half as f64) * spacing,
                    (j as f64 - half as f64) * spacing,
                    0.0,
                ]);
            }
        }
        IndexedCloud::new(WeightedCloud::new(2, 3, coords, None, 1.0).unwrap())
    }

    #[test]
    fn exact_projection_splits_cleanly() {
        let v = AffinePlane::coordinate(vec![0.0; 3], 2);
        let s = gershgorin_split(v.projection_matrix().matrix(), 2, 1, &v).unwrap();
        assert!(s.delta < 1e-12);
        for b in &s.big_values {
            assert!((b - 1.0).abs() < 1e-12);
        }
        assert!(s.small_values[0].abs() < 1e-12);
    }

    #[test]
    fn band_values() {
        let v = AffinePlane::coordinate(vec![0.0; 3], 2);
        let l = v.projection_matrix().matrix() * 0.99;
        let s = gershgorin_split_with_delta(&l, 2, 1, 0.01).unwrap();
        assert!((s.big_lower_bound() - 0.97).abs() < 1e-15);
        assert!((s.small_upper_bound() - 0.03).abs() < 1e-15);
        assert!((split_delta0(2, 1) - 1.0 / 16.0).abs() < 1e-15);
        assert!(matches!(
            gershgorin_split_with_delta(&l, 2, 1, 0.2),
            Err(Error::DeltaTooLarge { .. })
        ));
    }

    #[test]
    fn wrong_band_is_a_violation() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 0.0]));
        assert!(matches!(
            gershgorin_split_with_delta(&l, 2, 1, 0.01),
            Err(Error::SplitViolation { position: 1, .. })
        ));
    }

    #[test]
    fn flat_fit_recovers_plane() {
        let ic = grid(10, 0.1);
        let field = TangentField::constant(ic.cloud.len(), ProjMatrix::diagonal(&[1.0, 1.0, 0.0]));
        let fit = fit_plane(&ic, &field, &[0.2, 0.1, 0.0], 0.5, 2.0).unwrap();
        for p in ic.cloud.points() {
            assert!(fit.plane.distance(p) < 1e-9);
        }
        for nrm in &fit.normals {
            for u in fit.plane.frame() {
                assert_eq!(dot(nrm, u).abs() < 1e-12, true);
            }
        }
    }

    #[test]
    fn isotropic_tangents_have_no_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ic = grid(10, 0.1);
        let entries = (0..ic.cloud.len())
            .map(|_| {
                let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
                let q = m.qr().q();
                let frame: Vec<Vec<f64>> =
                    (0..2).map(|c| q.column(c).iter().copied().collect()).collect();
                Some(ProjMatrix::from_orthonormal(3, &frame))
            })
            .collect();
        let field = TangentField::exact(entries);
        assert!(matches!(
            fit_plane_t1(&ic, &field, &[0.0; 3], 1.0, 1.0),
            Err(Error::EigengapTooSmall { .. })
        ));
    }

    #[test]
    fn witness_off_line_and_point() {
        let ic = grid(20, 0.05);
        let x0 = [0.0; 3];
        let c0 = tolerance::WITNESS_C0;
        let line = AffinePlane::new(vec![0.0; 3], vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let j = find_point_off_subspace(&ic, &x0, 0.5, &line, c0).unwrap();
        assert!(line.distance(ic.point(j)) >= 11.0 * c0 * 0.5);
        // exhaustive scan: the farthest sample within the ball
        let best = ic
            .index
            .within(&x0, 0.5)
            .into_iter()
            .map(|i| line.distance(ic.point(i)))
            .fold(0.0, f64::max);
        assert_eq!(line.distance(ic.point(j)), best);

        let point = AffinePlane::new(vec![0.0; 3], vec![]).unwrap();
        let j = find_point_off_subspace(&ic, &x0, 0.5, &point, c0).unwrap();
        assert!(linalg::dist(ic.point(j), &x0) >= 11.0 * c0 * 0.5);

        let plane = AffinePlane::coordinate(vec![0.0; 3], 2);
        assert!(matches!(
            find_point_off_subspace(&ic, &x0, 0.5, &plane, c0),
            Err(Error::SubspaceTooLarge { k: 2, max: 1 })
        ));
        assert!(matches!(
            find_point_off_subspace(&ic, &x0, 0.5, &line, 0.2),
            Err(Error::NoWitness { .. })
        ));
    }

    #[test]
    fn orthogonal_span_coefficients() {
        let us = vec![vec![2.0, 0.0, 0.0], vec![0.0, 0.5, 0.0]];
        let v = [3.0, 1.0, 0.0];
        let bounds = SpanBounds { lower: 0.1, upper: 5.0 };
        let b = span_coefficients(&us, &v, 1.0, bounds).unwrap();
        assert!((b[0] - 6.0 / 4.0).abs() < 1e-14);
        assert!((b[1] - 0.5 / 0.25).abs() < 1e-14);
        assert!(matches!(
            span_coefficients(&us, &[0.0, 0.0, 1.0], 1.0, bounds),
            Err(Error::NotInSpan { .. })
        ));
        let tight = SpanBounds { lower: 1.0, upper: 5.0 };
        assert!(matches!(
            span_coefficients(&us, &v, 1.0, tight),
            Err(Error::IllConditioned(_))
        ));
    }
}
