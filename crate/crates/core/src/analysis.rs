//! Multiscale statistics of a sampled set: PCA tangents, averaged
//! projections, alpha numbers and their Carleson sums, beta_1 numbers,
//! codimension-one normal oscillation, Ahlfors ratios and Reifenberg
//! flatness.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AffinePlane, ProjMatrix};
use crate::index::IndexedCloud;
use crate::linalg::{self, dot};
use crate::tolerance;

/// Per-sample tangent projections, `None` where the estimate was rejected.
#[derive(Debug, Clone)]
pub struct TangentField {
    entries: Vec<Option<ProjMatrix>>,
    radius: f64,
}

impl TangentField {
    /// Wraps known tangents (radius 0 marks them as exact).
    pub fn exact(entries: Vec<Option<ProjMatrix>>) -> Self {
        Self {
            entries,
            radius: 0.0,
        }
    }

    pub fn constant(count: usize, p: ProjMatrix) -> Self {
        Self::exact(vec![Some(p); count])
    }

    /// Local PCA tangent at every sample with radius `h`; samples whose
    /// neighborhoods are degenerate or lack an eigengap are left invalid.
    pub fn estimate(ic: &IndexedCloud, h: f64) -> Self {
        let entries = (0..ic.cloud.len())
            .into_par_iter()
            .map(|i| estimate_tangent(ic, i, h).ok())
            .collect();
        Self { entries, radius: h }
    }

    /// Twice the mean nearest-neighbor spacing.
    pub fn default_radius(ic: &IndexedCloud) -> f64 {
        tolerance::TANGENT_RADIUS_FACTOR * ic.mean_spacing()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Option<&ProjMatrix> {
        self.entries[i].as_ref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn valid_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn entries(&self) -> &[Option<ProjMatrix>] {
        &self.entries
    }
}

/// Mass-weighted covariance of the given samples around their centroid.
pub(crate) fn weighted_covariance(ic: &IndexedCloud, idx: &[usize]) -> (Vec<f64>, DMatrix<f64>) {
    let dim = ic.dim_ambient();
    let mut mass = 0.0;
    let mut c = vec![0.0; dim];
    for &j in idx {
        let w = ic.cloud.weight(j);
        mass += w;
        linalg::add_scaled(&mut c, w, ic.point(j));
    }
    c.iter_mut().for_each(|x| *x /= mass);
    let mut cov = DMatrix::zeros(dim, dim);
    for &j in idx {
        let w = ic.cloud.weight(j) / mass;
        let p = ic.point(j);
        for a in 0..dim {
            let da = p[a] - c[a];
            for b in a..dim {
                cov[(a, b)] += w * da * (p[b] - c[b]);
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    (c, cov)
}

/// Projection onto the top-`n` principal directions of the ball of radius
/// `h` around sample `i`.
pub fn estimate_tangent(ic: &IndexedCloud, i: usize, h: f64) -> Result<ProjMatrix> {
    let n = ic.dim_intrinsic();
    let hits = ic.ball(ic.point(i), h);
    if hits.indices.len() < n + 1 {
        return Err(Error::DegenerateNeighborhood(format!(
            "{} samples within radius {h}",
            hits.indices.len()
        )));
    }
    let (_, cov) = weighted_covariance(ic, &hits.indices);
    let eig = linalg::symmetric_eigen(&cov, tolerance::JACOBI_TOL)?;
    let l1 = eig.values[0];
    if l1 <= 0.0 || eig.values[n - 1] <= tolerance::RANK * l1 {
        return Err(Error::DegenerateNeighborhood(format!(
            "covariance rank below {n}"
        )));
    }
    let gap = eig.values[n - 1] - eig.values.get(n).copied().unwrap_or(0.0);
    if gap < tolerance::TANGENT_GAP * l1 {
        return Err(Error::EigengapTooSmall {
            gap,
            threshold: tolerance::TANGENT_GAP * l1,
        });
    }
    let frame: Vec<Vec<f64>> = (0..n).map(|k| eig.vector(k)).collect();
    Ok(ProjMatrix::from_orthonormal(ic.dim_ambient(), &frame))
}

/// Samples of the closed ball that carry a valid tangent.
fn valid_in_ball(ic: &IndexedCloud, field: &TangentField, x: &[f64], r: f64) -> Vec<usize> {
    ic.ball(x, r)
        .indices
        .into_iter()
        .filter(|&j| field.get(j).is_some())
        .collect()
}

fn mean_projection(ic: &IndexedCloud, field: &TangentField, idx: &[usize]) -> (ProjMatrix, f64) {
    let dim = ic.dim_ambient();
    let mut sum = vec![0.0; dim * dim];
    let mut mass = 0.0;
    for &j in idx {
        let w = ic.cloud.weight(j);
        mass += w;
        linalg::add_scaled(&mut sum, w, field.get(j).unwrap().as_slice());
    }
    let acc = DMatrix::from_column_slice(dim, dim, &sum) / mass;
    // exact symmetry after floating-point accumulation
    let sym = (&acc + acc.transpose()) * 0.5;
    (ProjMatrix::from_raw(sym), mass)
}

/// Mass-weighted mean of the tangent projections over the closed ball.
pub fn average_projection(
    ic: &IndexedCloud,
    field: &TangentField,
    x: &[f64],
    r: f64,
) -> Result<ProjMatrix> {
    let idx = valid_in_ball(ic, field, x, r);
    if idx.is_empty() {
        return Err(Error::EmptyBall { radius: r });
    }
    Ok(mean_projection(ic, field, &idx).0)
}

fn alpha_on(ic: &IndexedCloud, field: &TangentField, idx: &[usize]) -> f64 {
    let (avg, mass) = mean_projection(ic, field, idx);
    let s: f64 = idx
        .iter()
        .map(|&j| ic.cloud.weight(j) * field.get(j).unwrap().frobenius_sq_to(&avg))
        .sum();
    (s / mass).max(0.0).sqrt()
}

/// `alpha(x, r)`: root mean squared Frobenius deviation of the tangent
/// projections from their ball average.
pub fn alpha(ic: &IndexedCloud, field: &TangentField, x: &[f64], r: f64) -> Result<f64> {
    let idx = valid_in_ball(ic, field, x, r);
    if idx.is_empty() {
        return Err(Error::EmptyBall { radius: r });
    }
    Ok(alpha_on(ic, field, &idx))
}

/// Alpha numbers of one center along a geometric sequence of radii.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub center: Vec<f64>,
    pub scales: Vec<f64>,
    pub alphas: Vec<f64>,
    pub carleson_sum: f64,
    /// Tangent estimation radius behind the alphas (0 for exact tangents).
    pub tangent_radius: f64,
}

/// Alphas at `base * 10^-(k-1)` for `k = 1..=depth`, stopping at the first
/// scale whose ball holds fewer than `n + 1` usable samples.
pub fn carleson_profile(
    ic: &IndexedCloud,
    field: &TangentField,
    x: &[f64],
    depth: usize,
    base: f64,
) -> Result<AlphaProfile> {
    let n = ic.dim_intrinsic();
    let mut scales = Vec::new();
    let mut alphas = Vec::new();
    for k in 0..depth.max(1) {
        let r = base * 10f64.powi(-(k as i32));
        let idx = valid_in_ball(ic, field, x, r);
        if idx.is_empty() && k == 0 {
            return Err(Error::EmptyBall { radius: r });
        }
        if idx.len() < n + 1 {
            break;
        }
        scales.push(r);
        alphas.push(alpha_on(ic, field, &idx));
    }
    let carleson_sum = alphas.iter().map(|a| a * a).sum();
    Ok(AlphaProfile {
        center: x.to_vec(),
        scales,
        alphas,
        carleson_sum,
        tangent_radius: field.radius(),
    })
}

/// Trapezoid rule for `int alpha^2(x, r) dr / r` over `[r_min, r_max]` with
/// `per_decade` nodes per decade in `log r`.
pub fn carleson_integral(
    ic: &IndexedCloud,
    field: &TangentField,
    x: &[f64],
    r_min: f64,
    r_max: f64,
    per_decade: usize,
) -> Result<f64> {
    let decades = (r_max / r_min).log10();
    let steps = ((decades * per_decade as f64).ceil() as usize).max(1);
    let h = (r_max / r_min).ln() / steps as f64;
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for s in 0..=steps {
        let r = r_min * (h * s as f64).exp();
        let a = alpha(ic, field, x, r)?;
        let v = a * a;
        if let Some(p) = prev {
            total += 0.5 * (p + v) * h;
        }
        prev = Some(v);
    }
    Ok(total)
}

/// Consistently oriented unit normals of a codimension-one cloud.
#[derive(Debug, Clone)]
pub struct NormalField {
    normals: Vec<Option<Vec<f64>>>,
}

impl NormalField {
    /// Breadth-first orientation from the lowest-index sample of each
    /// component over the graph of valid samples within `radius`.
    pub fn orient(ic: &IndexedCloud, field: &TangentField, radius: f64) -> Result<Self> {
        let codim = ic.cloud.codim();
        if codim != 1 {
            return Err(Error::CodimensionNotOne(codim));
        }
        let mut normals: Vec<Option<Vec<f64>>> = (0..ic.cloud.len())
            .map(|i| field.get(i).map(unit_normal))
            .collect();
        let mut seen = vec![false; normals.len()];
        let mut queue = VecDeque::new();
        for start in 0..normals.len() {
            if seen[start] || normals[start].is_none() {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let ni = normals[i].clone().unwrap();
                for j in ic.index.within(ic.point(i), radius) {
                    if j == i || normals[j].is_none() {
                        continue;
                    }
                    if !seen[j] {
                        let nj = normals[j].as_mut().unwrap();
                        if dot(&ni, nj) < 0.0 {
                            nj.iter_mut().for_each(|v| *v = -*v);
                        }
                        seen[j] = true;
                        queue.push_back(j);
                    } else {
                        let inner = dot(&ni, normals[j].as_ref().unwrap());
                        if inner < -tolerance::FLIP {
                            return Err(Error::OrientationFailure { i, j, inner });
                        }
                    }
                }
            }
        }
        Ok(Self { normals })
    }

    pub fn get(&self, i: usize) -> Option<&[f64]> {
        self.normals[i].as_deref()
    }
}

/// Unit vector spanning the kernel of a codimension-one projection.
fn unit_normal(p: &ProjMatrix) -> Vec<f64> {
    let q = p.complement();
    let dim = q.dim();
    let col = (0..dim)
        .max_by(|&a, &b| q.get(a, a).total_cmp(&q.get(b, b)))
        .unwrap();
    let mut v: Vec<f64> = (0..dim).map(|r| q.get(r, col)).collect();
    linalg::normalize(&mut v);
    v
}

/// Root mean squared deviation of the oriented unit normal from its ball
/// average.
pub fn normal_oscillation(
    ic: &IndexedCloud,
    normals: &NormalField,
    x: &[f64],
    r: f64,
) -> Result<f64> {
    let idx: Vec<usize> = ic
        .ball(x, r)
        .indices
        .into_iter()
        .filter(|&j| normals.get(j).is_some())
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyBall { radius: r });
    }
    let dim = ic.dim_ambient();
    let mut mean = vec![0.0; dim];
    let mut mass = 0.0;
    for &j in &idx {
        let w = ic.cloud.weight(j);
        mass += w;
        linalg::add_scaled(&mut mean, w, normals.get(j).unwrap());
    }
    mean.iter_mut().for_each(|v| *v /= mass);
    let s: f64 = idx
        .iter()
        .map(|&j| ic.cloud.weight(j) * linalg::dist2(normals.get(j).unwrap(), &mean))
        .sum();
    Ok((s / mass).max(0.0).sqrt())
}

/// Mass-weighted mean of `d(p, plane) / r` over the closed ball.
pub fn beta1(ic: &IndexedCloud, x: &[f64], r: f64, plane: &AffinePlane) -> Result<f64> {
    let hits = ic.ball(x, r);
    if hits.indices.is_empty() {
        return Err(Error::EmptyBall { radius: r });
    }
    let s: f64 = hits
        .indices
        .iter()
        .map(|&j| ic.cloud.weight(j) * plane.distance(ic.point(j)))
        .sum();
    Ok(s / (hits.mass * r))
}

/// `mu(B_r(x)) / r^n` for each radius.
pub fn ahlfors_ratio(ic: &IndexedCloud, x: &[f64], scales: &[f64]) -> Vec<f64> {
    let n = ic.dim_intrinsic() as i32;
    scales
        .iter()
        .map(|&r| ic.ball(x, r).mass / r.powi(n))
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AhlforsSummary {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Smallest `C_M` with `C_M^-1 <= ratio <= C_M` on every sampled ball.
    pub constant: f64,
}

pub fn ahlfors_summary(ic: &IndexedCloud, centers: &[usize], scales: &[f64]) -> AhlforsSummary {
    let ratios: Vec<f64> = centers
        .par_iter()
        .flat_map_iter(|&i| ahlfors_ratio(ic, ic.point(i), scales))
        .collect();
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    AhlforsSummary {
        min_ratio,
        max_ratio,
        constant: max_ratio.max(1.0 / min_ratio),
    }
}

/// Result of the flatness search.
#[derive(Debug, Clone)]
pub struct Flatness {
    pub value: f64,
    pub plane: AffinePlane,
    pub cloud_to_plane: f64,
    pub plane_to_cloud: f64,
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Unit vector from quasi-random coordinates in `[-1, 1]`.
fn halton_direction(sample: usize, first_dim: usize, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len)
        .map(|k| 2.0 * radical_inverse(sample, PRIMES[(first_dim + k) % PRIMES.len()]) - 1.0)
        .collect();
    if linalg::normalize(&mut v) < 1e-9 {
        v = vec![0.0; len];
        v[0] = 1.0;
    }
    v
}

/// Principal frame (tangent then normal directions) of a ball.
fn pca_frame(ic: &IndexedCloud, idx: &[usize]) -> Option<Vec<Vec<f64>>> {
    if idx.len() < ic.dim_intrinsic() + 1 {
        return None;
    }
    let (_, cov) = weighted_covariance(ic, idx);
    let eig = linalg::symmetric_eigen(&cov, tolerance::JACOBI_TOL).ok()?;
    Some((0..ic.dim_ambient()).map(|k| eig.vector(k)).collect())
}

/// Grid points of the `n`-disk of radius `r` centered at the plane base.
fn disk_grid(plane: &AffinePlane, r: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let n = plane.dim();
    let mut out = Vec::new();
    let total = per_axis.pow(n as u32);
    let step = if per_axis > 1 {
        2.0 * r / (per_axis - 1) as f64
    } else {
        0.0
    };
    for code in 0..total {
        let mut c = code;
        let mut t = Vec::with_capacity(n);
        for _ in 0..n {
            t.push(-r + step * (c % per_axis) as f64);
            c /= per_axis;
        }
        if dot(&t, &t) <= r * r * (1.0 + 1e-12) {
            out.push(plane.point_at(&t));
        }
    }
    out
}

/// Upper estimate of the Reifenberg flatness at `(x, r)`: the best
/// two-sided normalized deviation over a finite family of planes through
/// `x` (PCA planes at `r`, `r/2`, `r/4` and tilted perturbations).
pub fn reifenberg_flatness(ic: &IndexedCloud, x: &[f64], r: f64) -> Result<Flatness> {
    let hits = ic.ball(x, r);
    if hits.indices.is_empty() {
        return Err(Error::EmptyBall { radius: r });
    }
    let n = ic.dim_intrinsic();
    let dim = ic.dim_ambient();
    let mut frames = Vec::new();
    for s in [1.0, 0.5, 0.25] {
        let idx = if s == 1.0 {
            hits.indices.clone()
        } else {
            ic.index.within(x, r * s)
        };
        if let Some(f) = pca_frame(ic, &idx) {
            frames.push(f);
        }
    }
    let Some(reference) = frames.first().cloned() else {
        return Err(Error::DegenerateNeighborhood(format!(
            "{} samples within radius {r}",
            hits.indices.len()
        )));
    };
    let mut candidates: Vec<AffinePlane> = frames
        .iter()
        .map(|f| AffinePlane::new(x.to_vec(), f[..n].to_vec()))
        .collect::<Result<_>>()?;
    let tangent = &reference[..n];
    let normal = &reference[n..];
    for c in 1..=tolerance::FLATNESS_CANDIDATES {
        let theta = tolerance::FLATNESS_TILT * radical_inverse(c, PRIMES[0]);
        let tc = halton_direction(c, 1, n);
        let nc = halton_direction(c, 1 + n, dim - n);
        let mut t = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        for (k, u) in tangent.iter().enumerate() {
            linalg::add_scaled(&mut t, tc[k], u);
        }
        for (k, u) in normal.iter().enumerate() {
            linalg::add_scaled(&mut v, nc[k], u);
        }
        let frame: Vec<Vec<f64>> = tangent
            .iter()
            .map(|u| {
                let a = dot(u, &t);
                let mut w = u.clone();
                linalg::add_scaled(&mut w, (theta.cos() - 1.0) * a, &t);
                linalg::add_scaled(&mut w, theta.sin() * a, &v);
                w
            })
            .collect();
        candidates.push(AffinePlane::from_spanning(x.to_vec(), &frame)?);
    }

    let mut best: Option<Flatness> = None;
    for plane in candidates {
        let c2p = hits
            .indices
            .iter()
            .map(|&j| plane.distance(ic.point(j)))
            .fold(0.0, f64::max)
            / r;
        let p2c = disk_grid(&plane, r, tolerance::FLATNESS_GRID)
            .iter()
            .map(|g| ic.index.nearest(g).map(|(_, d)| d).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
            / r;
        let value = c2p.max(p2c);
        if best.as_ref().map(|b| value < b.value).unwrap_or(true) {
            best = Some(Flatness {
                value,
                plane,
                cloud_to_plane: c2p,
                plane_to_cloud: p2c,
            });
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WeightedCloud;
    use std::f64::consts::PI;

    fn grid_plane(half: usize, spacing: f64) -> IndexedCloud {
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
        let count = coords.len() / 3;
        let w = spacing * spacing;
        IndexedCloud::new(WeightedCloud::new(2, 3, coords, Some(vec![w; count]), 1.0).unwrap())
    }

    #[test]
    fn coplanar_samples_recover_the_plane() {
        let ic = grid_plane(10, 0.1);
        let p = estimate_tangent(&ic, 0, 0.35).unwrap();
        let want = ProjMatrix::diagonal(&[1.0, 1.0, 0.0]);
        assert!(p.frobenius_sq_to(&want).sqrt() < 1e-10);
    }

    #[test]
    fn collinear_samples_are_degenerate() {
        let coords = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        let ic = IndexedCloud::new(WeightedCloud::new(2, 3, coords, None, 1.0).unwrap());
        assert!(matches!(
            estimate_tangent(&ic, 0, 5.0),
            Err(Error::DegenerateNeighborhood(_))
        ));
    }

    #[test]
    fn average_of_mixed_projections() {
        let coords = vec![0.0, 0.0, 0.1, 0.0];
        let ic = IndexedCloud::new(WeightedCloud::new(1, 2, coords, None, 1.0).unwrap());
        let p1 = ProjMatrix::diagonal(&[1.0, 0.0]);
        let p2 = ProjMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        let field = TangentField::exact(vec![Some(p1.clone()), Some(p2.clone())]);
        let avg = average_projection(&ic, &field, &[0.0, 0.0], 1.0).unwrap();
        let want = [0.75, 0.25, 0.25, 0.25];
        for (got, w) in avg.as_slice().iter().zip(want) {
            assert!((got - w).abs() < 1e-15);
        }
        let a = alpha(&ic, &field, &[0.0, 0.0], 1.0).unwrap();
        let half = p1.frobenius_sq_to(&p2).sqrt() / 2.0;
        assert!((a - half).abs() < 1e-15);
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_ball_errors() {
        let ic = grid_plane(2, 1.0);
        let field = TangentField::exact(vec![None; ic.cloud.len()]);
        assert!(matches!(
            average_projection(&ic, &field, &[0.0; 3], 5.0),
            Err(Error::EmptyBall { .. })
        ));
        assert!(matches!(
            beta1(&ic, &[0.5, 0.5, 0.0], 0.1, &AffinePlane::coordinate(vec![0.0; 3], 2)),
            Err(Error::EmptyBall { .. })
        ));
    }

    #[test]
    fn flat_cloud_statistics_vanish() {
        let ic = grid_plane(20, 0.05);
        let field = TangentField::constant(ic.cloud.len(), ProjMatrix::diagonal(&[1.0, 1.0, 0.0]));
        for r in [0.1, 0.3, 0.7] {
            assert!(alpha(&ic, &field, &[0.0; 3], r).unwrap() <= 1e-9);
        }
        let plane = AffinePlane::coordinate(vec![0.0; 3], 2);
        assert_eq!(beta1(&ic, &[0.0; 3], 0.5, &plane).unwrap(), 0.0);
        let lifted = AffinePlane::coordinate(vec![0.0, 0.0, 0.02], 2);
        assert!((beta1(&ic, &[0.0; 3], 0.5, &lifted).unwrap() - 0.04).abs() < 1e-12);
        let profile = carleson_profile(&ic, &field, &[0.0; 3], 4, 1.0).unwrap();
        assert!(profile.alphas.iter().all(|a| *a <= 1e-9));
        assert_eq!(profile.carleson_sum, 0.0);
        let f = reifenberg_flatness(&ic, &[0.0; 3], 0.5).unwrap();
        assert!(f.cloud_to_plane < 1e-12);
        // plane-to-cloud is limited by the grid half-diagonal
        assert!(f.value <= 0.05 / 2f64.sqrt() / 0.5 + 1e-12, "{}", f.value);
    }

    #[test]
    fn profile_truncates_at_resolution() {
        let ic = grid_plane(10, 0.1);
        let field = TangentField::constant(ic.cloud.len(), ProjMatrix::diagonal(&[1.0, 1.0, 0.0]));
        let profile = carleson_profile(&ic, &field, &[0.0; 3], 6, 1.0).unwrap();
        // radius 0.1 still holds five grid samples, radius 0.01 only one
        assert_eq!(profile.scales.len(), 2);
    }

    #[test]
    fn ahlfors_on_grid_disk() {
        let ic = grid_plane(100, 0.01);
        let ratios = ahlfors_ratio(&ic, &[0.0; 3], &[0.1, 0.2]);
        for r in ratios {
            assert!((r - PI).abs() / PI < 0.1, "{r}");
        }
        let edge = ahlfors_ratio(&ic, &[1.0, 0.0, 0.0], &[0.1, 0.2]);
        for r in edge {
            assert!((r - PI / 2.0).abs() / (PI / 2.0) < 0.1, "{r}");
        }
    }

    #[test]
    fn normals_reject_wrong_codimension() {
        let coords = vec![0.0; 8];
        let ic = IndexedCloud::new(WeightedCloud::new(2, 4, coords, None, 1.0).unwrap());
        let field = TangentField::exact(vec![None; 2]);
        assert!(matches!(
            NormalField::orient(&ic, &field, 1.0),
            Err(Error::CodimensionNotOne(2))
        ));
    }
}
