//! Weighted point clouds, affine planes, projection matrices and the
//! normalized local Hausdorff distance between planes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, sub};
use crate::tolerance;

/// Finite sample of an `n`-dimensional set in `R^(n+d)` with per-point
/// masses approximating Hausdorff measure.
#[derive(Debug, Clone)]
pub struct WeightedCloud {
    dim_ambient: usize,
    dim_intrinsic: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl WeightedCloud {
    /// Builds a cloud from row-major coordinates. Without explicit weights
    /// every point receives `total_mass / N`.
    pub fn new(
        dim_intrinsic: usize,
        dim_ambient: usize,
        coords: Vec<f64>,
        weights: Option<Vec<f64>>,
        total_mass: f64,
    ) -> Result<Self> {
        if dim_intrinsic < 1 || dim_intrinsic >= dim_ambient {
            return Err(Error::InvalidCloud(format!(
                "need 1 <= n < n + d, got n = {dim_intrinsic}, n + d = {dim_ambient}"
            )));
        }
        if coords.len() % dim_ambient != 0 {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates do not split into points of length {dim_ambient}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCloud("non-finite coordinate".into()));
        }
        let count = coords.len() / dim_ambient;
        let weights = match weights {
            Some(w) => {
                if w.len() != count {
                    return Err(Error::DimensionMismatch {
                        expected: count,
                        got: w.len(),
                    });
                }
                w
            }
            None => {
                if !(total_mass > 0.0) {
                    return Err(Error::InvalidCloud("total mass must be positive".into()));
                }
                vec![total_mass / count.max(1) as f64; count]
            }
        };
        if let Some(bad) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "weight {bad} is not strictly positive"
            )));
        }
        let total_mass = weights.iter().sum();
        Ok(Self {
            dim_ambient,
            dim_intrinsic,
            coords,
            weights,
            total_mass,
        })
    }

    pub fn from_points(
        dim_intrinsic: usize,
        points: &[Vec<f64>],
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(dim_intrinsic + 1);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim_intrinsic, dim, coords, weights, 1.0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn dim_ambient(&self) -> usize {
        self.dim_ambient
    }

    #[inline]
    pub fn dim_intrinsic(&self) -> usize {
        self.dim_intrinsic
    }

    #[inline]
    pub fn codim(&self) -> usize {
        self.dim_ambient - self.dim_intrinsic
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim_ambient..(i + 1) * self.dim_ambient]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim_ambient)
    }

    /// Mass-weighted centroid of the whole cloud.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim_ambient];
        for (p, w) in self.points().zip(&self.weights) {
            linalg::add_scaled(&mut c, *w, p);
        }
        c.iter_mut().for_each(|x| *x /= self.total_mass);
        c
    }

    /// Applies `f` to every point, keeping weights.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.points() {
            coords.extend(f(p));
        }
        Self::new(
            self.dim_intrinsic,
            self.dim_ambient,
            coords,
            Some(self.weights.clone()),
            self.total_mass,
        )
    }

    /// Multiplies all weights by `s`.
    pub fn scale_weights(&self, s: f64) -> Result<Self> {
        Self::new(
            self.dim_intrinsic,
            self.dim_ambient,
            self.coords.clone(),
            Some(self.weights.iter().map(|w| w * s).collect()),
            self.total_mass * s,
        )
    }

    /// Checks the cached invariants.
    pub fn check(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if ((sum - self.total_mass) / self.total_mass).abs() > tolerance::TOTAL_MASS_REL {
            return Err(Error::InvalidCloud("total mass out of sync".into()));
        }
        Ok(())
    }
}

/// Symmetric `(n+d) x (n+d)` matrix holding an orthogonal projection or an
/// average of projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjMatrix(DMatrix<f64>);

impl ProjMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let defect = linalg::symmetry_defect(&m);
        if defect > tolerance::SYMMETRY {
            return Err(Error::NotSymmetric(defect));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_raw(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    /// Projection onto the span of the given unit vectors (assumed orthonormal).
    pub fn from_orthonormal(dim: usize, frame: &[Vec<f64>]) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for v in frame {
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] += v[i] * v[j];
                }
            }
        }
        Self(m)
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            entries,
        )))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `I - P`.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        Self(DMatrix::identity(n, n) - &self.0)
    }

    /// Squared Frobenius norm of `self - other` without allocating.
    #[inline]
    pub fn frobenius_sq_to(&self, other: &ProjMatrix) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Whether the matrix is an orthogonal projection of rank `n`.
    pub fn is_projection_of_rank(&self, n: usize) -> bool {
        let sq = &self.0 * &self.0;
        (sq - &self.0).amax() <= tolerance::IDEMPOTENCE
            && (self.trace() - n as f64).abs() <= tolerance::IDEMPOTENCE
    }

    /// Whether the spectrum lies in `[0, 1]` up to the configured slack.
    pub fn spectrum_in_unit_interval(&self) -> Result<bool> {
        let eig = linalg::symmetric_eigen(&self.0, tolerance::JACOBI_TOL)?;
        Ok(eig.values.iter().all(|v| {
            *v >= -tolerance::SPECTRUM_SLACK && *v <= 1.0 + tolerance::SPECTRUM_SLACK
        }))
    }
}

/// Square root of the sum of squared entry differences.
pub fn frobenius_distance(a: &ProjMatrix, b: &ProjMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.frobenius_sq_to(b).sqrt())
}

/// Affine subspace given by a base point and an orthonormal frame.
///
/// An `n`-plane carries `n` frame vectors; lower-dimensional subspaces (as
/// used by the witness search) carry fewer, down to a single point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePlane {
    base: Vec<f64>,
    frame: Vec<Vec<f64>>,
}

impl AffinePlane {
    pub fn new(base: Vec<f64>, frame: Vec<Vec<f64>>) -> Result<Self> {
        let dim = base.len();
        if frame.len() > dim {
            return Err(Error::InvalidPlane(format!(
                "{} frame vectors in dimension {dim}",
                frame.len()
            )));
        }
        for (i, u) in frame.iter().enumerate() {
            if u.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: u.len(),
                });
            }
            for (j, v) in frame.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(u, v) - target).abs() > tolerance::ORTHONORMAL {
                    return Err(Error::InvalidPlane(format!(
                        "frame Gram entry ({i}, {j}) = {}",
                        dot(u, v)
                    )));
                }
            }
        }
        Ok(Self { base, frame })
    }

    /// Orthonormalizes `spanning` by modified Gram-Schmidt.
    pub fn from_spanning(base: Vec<f64>, spanning: &[Vec<f64>]) -> Result<Self> {
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(spanning.len());
        for s in spanning {
            let mut v = s.clone();
            for _ in 0..2 {
                for u in &frame {
                    let c = dot(&v, u);
                    linalg::add_scaled(&mut v, -c, u);
                }
            }
            let len = linalg::normalize(&mut v);
            if len <= 1e-12 * norm(s).max(1e-300) {
                return Err(Error::InvalidPlane("spanning vectors are dependent".into()));
            }
            frame.push(v);
        }
        Self::new(base, frame)
    }

    /// Plane through `base` spanned by the first `n` coordinate axes.
    pub fn coordinate(base: Vec<f64>, n: usize) -> Self {
        let dim = base.len();
        let frame = (0..n)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        Self { base, frame }
    }

    #[inline]
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    #[inline]
    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.base.len()
    }

    /// Frame coordinates of `y - base`.
    pub fn coordinates(&self, y: &[f64]) -> Vec<f64> {
        let rel = sub(y, &self.base);
        self.frame.iter().map(|u| dot(&rel, u)).collect()
    }

    /// Point `base + sum_i t_i u_i`.
    pub fn point_at(&self, t: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (ti, u) in t.iter().zip(&self.frame) {
            linalg::add_scaled(&mut p, *ti, u);
        }
        p
    }

    /// Orthogonal projection of `y` onto the plane.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        self.point_at(&self.coordinates(y))
    }

    /// Euclidean distance from `y` to the plane.
    pub fn distance(&self, y: &[f64]) -> f64 {
        let rel = sub(y, &self.base);
        let along: f64 = self.frame.iter().map(|u| dot(&rel, u).powi(2)).sum();
        (dot(&rel, &rel) - along).max(0.0).sqrt()
    }

    /// The parallel plane through `p`.
    pub fn through(&self, p: &[f64]) -> Self {
        Self {
            base: p.to_vec(),
            frame: self.frame.clone(),
        }
    }

    pub fn projection_matrix(&self) -> ProjMatrix {
        projection_matrix(self)
    }

    /// Applies a rigid motion `y -> R y + t`.
    pub fn transformed(&self, rotation: &DMatrix<f64>, shift: &[f64]) -> Self {
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..v.len())
                .map(|i| (0..v.len()).map(|j| rotation[(i, j)] * v[j]).sum())
                .collect()
        };
        let mut base = apply(&self.base);
        linalg::add_scaled(&mut base, 1.0, shift);
        Self {
            base,
            frame: self.frame.iter().map(|u| apply(u)).collect(),
        }
    }
}

/// `sum_i v_i v_i^T` over the frame vectors.
pub fn projection_matrix(plane: &AffinePlane) -> ProjMatrix {
    ProjMatrix::from_orthonormal(plane.ambient_dim(), plane.frame())
}

/// Maximum of `u^T Q u + 2 b^T u` over unit vectors `u`, with `Q`
/// symmetric positive semidefinite given by its eigen-decomposition.
fn max_quadratic_on_sphere(q: &linalg::SymmetricEigen, b: &[f64]) -> f64 {
    let n = q.values.len();
    if n == 0 {
        return 0.0;
    }
    let vals = &q.values;
    let bt: Vec<f64> = (0..n).map(|i| dot(&q.vector(i), b)).collect();
    let value_of = |u: &[f64]| -> f64 {
        (0..n)
            .map(|i| vals[i] * u[i] * u[i] + 2.0 * bt[i] * u[i])
            .sum()
    };
    let qmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let top = vals.iter().position(|v| *v == qmax).unwrap();
    let scale = qmax.abs().max(norm(&bt)).max(1e-300);

    let mut best = f64::NEG_INFINITY;
    for sign in [1.0, -1.0] {
        let mut u = vec![0.0; n];
        u[top] = sign;
        best = best.max(value_of(&u));
    }

    // secular equation sum b_i^2 / (mu - q_i)^2 = 1 on (qmax, qmax + |b|]
    let bnorm = norm(&bt);
    if bnorm > 0.0 {
        let phi = |mu: f64| -> f64 {
            (0..n)
                .map(|i| bt[i] * bt[i] / ((mu - vals[i]) * (mu - vals[i])))
                .sum::<f64>()
        };
        let mut lo = qmax;
        let mut hi = qmax + bnorm;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if phi(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut u: Vec<f64> = (0..n).map(|i| bt[i] / (hi - vals[i])).collect();
        if linalg::normalize(&mut u) > 0.0 && u.iter().all(|x| x.is_finite()) {
            best = best.max(value_of(&u));
        }
    }

    // hard case: b has no component on the top eigenspace
    let tie = 1e-12 * scale;
    let mut partial = vec![0.0; n];
    let mut ok = true;
    for i in 0..n {
        if (qmax - vals[i]).abs() <= tie {
            if bt[i].abs() > tie {
                ok = false;
            }
        } else {
            partial[i] = bt[i] / (qmax - vals[i]);
        }
    }
    if ok {
        let pn = dot(&partial, &partial);
        if pn <= 1.0 {
            let mut u = partial.clone();
            u[top] += (1.0 - pn).sqrt();
            best = best.max(value_of(&u));
        }
    }
    best
}

/// Supremum of `d(y, other)` over `y` in `plane` intersected with the
/// closed ball `B_r(x)`; `None` if the plane misses the ball.
fn one_sided_sup(plane: &AffinePlane, other: &AffinePlane, x: &[f64], r: f64) -> Option<f64> {
    let center = plane.project(x);
    let offset2 = linalg::dist2(x, &center);
    if offset2 > r * r {
        return None;
    }
    let rho = (r * r - offset2).max(0.0).sqrt();
    let comp = |v: &[f64]| -> Vec<f64> {
        let mut out = v.to_vec();
        for u in other.frame() {
            linalg::add_scaled(&mut out, -dot(v, u), u);
        }
        out
    };
    let w = comp(&sub(&center, other.base()));
    let n = plane.dim();
    let w2 = dot(&w, &w);
    if n == 0 || rho == 0.0 {
        return Some(w2.sqrt());
    }
    // columns (I - P_other) u_i
    let m: Vec<Vec<f64>> = plane.frame().iter().map(|u| comp(u)).collect();
    let q = DMatrix::from_fn(n, n, |i, j| rho * rho * dot(&m[i], &m[j]));
    let b: Vec<f64> = m.iter().map(|mi| rho * dot(mi, &w)).collect();
    let eig = linalg::symmetric_eigen(&q, tolerance::JACOBI_TOL).ok()?;
    let best = max_quadratic_on_sphere(&eig, &b);
    Some((w2 + best).max(0.0).sqrt())
}

/// Normalized local Hausdorff distance `d_{x,r}(E, F)` between two affine
/// planes, computed exactly.
pub fn plane_distance_local(e: &AffinePlane, f: &AffinePlane, x: &[f64], r: f64) -> Result<f64> {
    if e.ambient_dim() != f.ambient_dim() || x.len() != e.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: e.ambient_dim(),
            got: f.ambient_dim().max(x.len()),
        });
    }
    for p in [e, f] {
        let d = p.distance(x);
        if d > r {
            return Err(Error::PlaneMissesBall {
                distance: d,
                radius: r,
            });
        }
    }
    let a = one_sided_sup(e, f, x, r).unwrap_or(0.0);
    let b = one_sided_sup(f, e, x, r).unwrap_or(0.0);
    Ok(a.max(b) / r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn line(dir: [f64; 2], through: [f64; 2]) -> AffinePlane {
        AffinePlane::from_spanning(through.to_vec(), &[dir.to_vec()]).unwrap()
    }

    /// Dense-sampling oracle for the one-sided sups on a disk.
    fn sampled_distance(e: &AffinePlane, f: &AffinePlane, x: &[f64], r: f64, steps: usize) -> f64 {
        let side = |p: &AffinePlane, q: &AffinePlane| -> f64 {
            let c = p.project(x);
            let rho = (r * r - linalg::dist2(x, &c)).max(0.0).sqrt();
            let mut best = 0.0f64;
            match p.dim() {
                1 => {
                    for s in 0..=steps {
                        let t = -rho + 2.0 * rho * s as f64 / steps as f64;
                        let mut y = c.clone();
                        linalg::add_scaled(&mut y, t, &p.frame()[0]);
                        best = best.max(q.distance(&y));
                    }
                }
                2 => {
                    for s in 0..steps {
                        let th = 2.0 * PI * s as f64 / steps as f64;
                        let mut y = c.clone();
                        linalg::add_scaled(&mut y, rho * th.cos(), &p.frame()[0]);
                        linalg::add_scaled(&mut y, rho * th.sin(), &p.frame()[1]);
                        best = best.max(q.distance(&y));
                    }
                }
                _ => unreachable!(),
            }
            best
        };
        side(e, f).max(side(f, e)) / r
    }

    #[test]
    fn projection_matrix_examples() {
        let xy = AffinePlane::coordinate(vec![0.0; 3], 2);
        assert_eq!(projection_matrix(&xy), ProjMatrix::diagonal(&[1.0, 1.0, 0.0]));

        let diag = line([1.0, 1.0], [0.0, 0.0]);
        let p = projection_matrix(&diag);
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.get(i, j) - 0.5).abs() < 1e-15);
            }
        }

        let l = AffinePlane::new(
            vec![0.0; 3],
            vec![vec![FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2]],
        )
        .unwrap();
        let p = projection_matrix(&l);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i != 1 && j != 1 { 0.5 } else { 0.0 };
                assert!((p.get(i, j) - want).abs() < 1e-15);
            }
        }
        assert!(p.is_projection_of_rank(1));
    }

    #[test]
    fn projection_matrix_is_frame_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let span: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let p = AffinePlane::from_spanning(vec![0.0; 4], &span).unwrap();
            let th: f64 = rng.gen_range(0.0..(2.0 * PI));
            let (c, s) = (th.cos(), th.sin());
            let f = p.frame();
            let rotated: Vec<Vec<f64>> = vec![
                f[0].iter().zip(&f[1]).map(|(a, b)| c * a + s * b).collect(),
                f[0].iter().zip(&f[1]).map(|(a, b)| -s * a + c * b).collect(),
            ];
            let q = AffinePlane::new(vec![0.0; 4], rotated).unwrap();
            let d = frobenius_distance(&p.projection_matrix(), &q.projection_matrix()).unwrap();
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn frobenius_examples() {
        let a = ProjMatrix::diagonal(&[1.0, 0.0]);
        let b = ProjMatrix::diagonal(&[0.0, 1.0]);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        assert!((frobenius_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let c = ProjMatrix::diagonal(&[1.0, 0.0, 0.0]);
        let d = ProjMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
        ))
        .unwrap();
        assert!((frobenius_distance(&c, &d).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            frobenius_distance(&a, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identical_planes_have_zero_distance() {
        let p = AffinePlane::coordinate(vec![0.1, 0.2, 0.3], 2);
        assert_eq!(plane_distance_local(&p, &p, &[0.0, 0.0, 0.3], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn parallel_offset() {
        let e = AffinePlane::coordinate(vec![0.0; 3], 2);
        let f = AffinePlane::coordinate(vec![0.0, 0.0, 0.3], 2);
        let d = plane_distance_local(&e, &f, &[0.2, -0.1, 0.0], 1.0).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
    }

    #[test]
    fn crossing_lines_against_sampling() {
        for &theta in &[0.1, 0.4, 1.0, PI / 2.0, 2.5] {
            for &r in &[0.3, 1.0, 7.0] {
                let e = line([1.0, 0.0], [0.0, 0.0]);
                let f = line([theta.cos(), theta.sin()], [0.0, 0.0]);
                let exact = plane_distance_local(&e, &f, &[0.0, 0.0], r).unwrap();
                let oracle = sampled_distance(&e, &f, &[0.0, 0.0], r, 20000);
                assert!((exact - oracle).abs() < 1e-6, "theta={theta} {exact} {oracle}");
                assert!((exact - theta.sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_planes_against_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            let mk = |rng: &mut ChaCha8Rng| {
                let span: Vec<Vec<f64>> = (0..2)
                    .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let base: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.2..0.2)).collect();
                AffinePlane::from_spanning(base, &span).unwrap()
            };
            let e = mk(&mut rng);
            let f = mk(&mut rng);
            let x = vec![0.0; 3];
            let r = 1.0;
            let exact = plane_distance_local(&e, &f, &x, r).unwrap();
            let oracle = sampled_distance(&e, &f, &x, r, 20000);
            assert!(exact >= oracle - 1e-9);
            assert!(exact - oracle < 1e-6, "{exact} {oracle}");
            let swapped = plane_distance_local(&f, &e, &x, r).unwrap();
            assert_eq!(exact, swapped);
        }
    }

    #[test]
    fn plane_missing_ball() {
        let e = AffinePlane::coordinate(vec![0.0; 3], 2);
        let f = AffinePlane::coordinate(vec![0.0, 0.0, 2.0], 2);
        assert!(matches!(
            plane_distance_local(&e, &f, &[0.0; 3], 1.0),
            Err(Error::PlaneMissesBall { .. })
        ));
    }

    #[test]
    fn cloud_invariants() {
        let c = WeightedCloud::new(1, 2, vec![0.0, 0.0, 1.0, 0.0], None, 2.0).unwrap();
        assert_eq!(c.weights(), &[1.0, 1.0]);
        c.check().unwrap();
        assert!(WeightedCloud::new(2, 2, vec![0.0, 0.0], None, 1.0).is_err());
        assert!(WeightedCloud::new(1, 2, vec![0.0, 0.0, 1.0], None, 1.0).is_err());
        assert!(WeightedCloud::new(1, 2, vec![0.0, 0.0], Some(vec![0.0]), 1.0).is_err());
    }
}
