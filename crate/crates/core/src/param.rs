//! The iterative parameterization: partitions of unity on each level,
//! the blended projections `sigma_k`, the finite-depth composition `f_K`
//! on the reference plane, and distortion / containment measurements.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::sync::OnceLock;

use crate::ccbp::{Ccbp, EpsilonTable};
use crate::error::{Error, Result};
use crate::index::{IndexedCloud, SpatialIndex};
use crate::linalg;

/// Bump inner radius in units of the level radius.
pub const BUMP_INNER: f64 = 8.0;
/// Bump support radius in units of the level radius.
pub const BUMP_OUTER: f64 = 10.0;

/// Quintic smoothstep cutoff: one on `[0, 8]`, zero on `[10, inf)`.
pub fn bump(t: f64) -> f64 {
    if t <= BUMP_INNER {
        1.0
    } else if t >= BUMP_OUTER {
        0.0
    } else {
        let s = (BUMP_OUTER - t) / (BUMP_OUTER - BUMP_INNER);
        s * s * s * (10.0 + s * (6.0 * s - 15.0))
    }
}

/// Normalized bump weights of the level-`k` nodes at a point, plus the
/// background weight.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    pub weights: Vec<(usize, f64)>,
    pub background: f64,
}

pub fn partition_weights(c: &Ccbp, k: usize, y: &[f64]) -> Partition {
    let r = c.radius(k);
    let mut weights: Vec<(usize, f64)> = c
        .nodes_near(k, y, BUMP_OUTER * r)
        .into_iter()
        .map(|j| (j, bump(linalg::dist(y, &c.node(k, j).center) / r)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let norm = total.max(1.0);
    weights.iter_mut().for_each(|w| w.1 /= norm);
    let assigned: f64 = weights.iter().map(|w| w.1).sum();
    Partition {
        weights,
        background: (1.0 - assigned).max(0.0),
    }
}

/// `y + sum_j theta_jk(y) (pi_jk(y) - y)`.
pub fn sigma_k(c: &Ccbp, k: usize, y: &[f64]) -> Vec<f64> {
    let part = partition_weights(c, k, y);
    let mut out = y.to_vec();
    for (j, w) in part.weights {
        let p = c.node(k, j).plane.project(y);
        for a in 0..out.len() {
            out[a] += w * (p[a] - y[a]);
        }
    }
    out
}

/// Orbit of one point under the composition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapTrace {
    /// `f_0(z) = z, f_1(z), ..., f_K(z)`.
    pub orbit: Vec<Vec<f64>>,
    /// `|f_{k+1}(z) - f_k(z)|` for `k = 0..K`.
    pub steps: Vec<f64>,
}

impl MapTrace {
    pub fn image(&self) -> &[f64] {
        self.orbit.last().unwrap()
    }
}

/// Evaluation state of `f_K = sigma_{K-1} o ... o sigma_0`.
#[derive(Debug, Clone)]
pub struct MapPipeline<'a> {
    pub ccbp: &'a Ccbp,
    pub depth: usize,
    table: OnceLock<EpsilonTable>,
}

impl<'a> MapPipeline<'a> {
    /// Depth is capped at the number of levels of the collection.
    pub fn new(ccbp: &'a Ccbp, depth: usize) -> Self {
        Self {
            ccbp,
            depth: depth.min(ccbp.depth()),
            table: OnceLock::new(),
        }
    }

    pub fn full(ccbp: &'a Ccbp) -> Self {
        Self::new(ccbp, ccbp.depth())
    }

    pub fn map_f(&self, z: &[f64]) -> MapTrace {
        let mut orbit = Vec::with_capacity(self.depth + 1);
        let mut steps = Vec::with_capacity(self.depth);
        orbit.push(z.to_vec());
        for k in 0..self.depth {
            let next = sigma_k(self.ccbp, k, orbit.last().unwrap());
            steps.push(linalg::dist(&next, orbit.last().unwrap()));
            orbit.push(next);
        }
        MapTrace { orbit, steps }
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut y = z.to_vec();
        for k in 0..self.depth {
            y = sigma_k(self.ccbp, k, &y);
        }
        y
    }

    /// Partner table behind the budget, built on first use.
    pub fn table(&self) -> &EpsilonTable {
        self.table.get_or_init(|| EpsilonTable::build(self.ccbp))
    }

    /// `sum_{k >= 1} eps'_k(f_k(z))^2` along an orbit.
    pub fn budget(&self, trace: &MapTrace) -> f64 {
        (1..self.depth.min(self.ccbp.depth()))
            .map(|k| self.table().epsilon_prime(self.ccbp, k, &trace.orbit[k]).powi(2))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Distortion {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub k_est: f64,
    /// Per-point budgets, aligned with the input points.
    pub budgets: Vec<f64>,
    pub max_budget: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Ratios `|f_K(z1) - f_K(z2)| / |z1 - z2|` over the given pairs of
/// `points`; coincident pairs are skipped.
pub fn distortion(
    pipe: &MapPipeline,
    points: &[Vec<f64>],
    pairs: &[(usize, usize)],
) -> Result<Distortion> {
    let traces: Vec<MapTrace> = points.par_iter().map(|z| pipe.map_f(z)).collect();
    let budgets: Vec<f64> = traces.par_iter().map(|t| pipe.budget(t)).collect();
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    let mut used = 0;
    let mut skipped = 0;
    for &(a, b) in pairs {
        let d = linalg::dist(&points[a], &points[b]);
        if d == 0.0 {
            skipped += 1;
            continue;
        }
        let ratio = linalg::dist(traces[a].image(), traces[b].image()) / d;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        used += 1;
    }
    if used == 0 {
        let (a, b) = pairs.first().copied().unwrap_or((0, 0));
        return Err(Error::DegeneratePair(a, b));
    }
    Ok(Distortion {
        min_ratio,
        max_ratio,
        k_est: max_ratio.max(1.0 / min_ratio),
        max_budget: budgets.iter().cloned().fold(0.0, f64::max),
        budgets,
        pairs_used: used,
        pairs_skipped: skipped,
    })
}

/// Square grid of step `spacing` on the reference plane, restricted to the
/// disk of radius `radius` around the projection of the anchor. Returns
/// the points and their plane coordinates.
pub fn sigma0_grid(c: &Ccbp, radius: f64, spacing: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let plane = c.sigma0.through(&c.sigma0.project(&c.anchor));
    let n = plane.dim();
    let per_side = (radius / spacing).floor() as i64;
    let width = (2 * per_side + 1) as usize;
    let mut points = Vec::new();
    let mut coords = Vec::new();
    for code in 0..width.pow(n as u32) {
        let mut rem = code;
        let mut t = Vec::with_capacity(n);
        for _ in 0..n {
            t.push(((rem % width) as i64 - per_side) as f64 * spacing);
            rem /= width;
        }
        if linalg::dot(&t, &t) <= radius * radius * (1.0 + 1e-12) {
            points.push(plane.point_at(&t));
            coords.push(t);
        }
    }
    (points, coords)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Containment {
    /// Largest distance from a region sample to the image surface.
    pub one_sided: f64,
    /// Largest distance from an image point in the region to the cloud.
    pub reverse: Option<f64>,
    pub grid_spacing: f64,
    pub samples: usize,
    pub worst_sample: usize,
    pub worst_image: Option<Vec<f64>>,
}

/// Gauss-Newton iterations for the closest point of the image surface.
const REFINE_STEPS: usize = 8;

/// Distance from cloud samples in `B(anchor, theta)` to `f_K(Sigma_0)`
/// (grid search refined by Gauss-Newton in plane coordinates); with
/// `symmetric` also the reverse sup over image grid points in the region.
pub fn containment_check(
    ic: &IndexedCloud,
    pipe: &MapPipeline,
    theta: f64,
    spacing: f64,
    symmetric: bool,
) -> Result<Containment> {
    let c = pipe.ccbp;
    let region = ic.index.within(&c.anchor, theta);
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let base = c.sigma0.project(&c.anchor);
    let plane = c.sigma0.through(&base);
    let grid_radius = 1.25 * theta + 2.0 * spacing;
    let (points, coords) = sigma0_grid(c, grid_radius, spacing);
    let images: Vec<Vec<f64>> = points.par_iter().map(|z| pipe.apply(z)).collect();
    let dim = ic.dim_ambient();
    let flat: Vec<f64> = images.iter().flatten().copied().collect();
    let image_index = SpatialIndex::build(&flat, dim);

    let surface = |t: &[f64]| pipe.apply(&plane.point_at(t));
    let h = spacing * 1e-3;
    let distances: Vec<f64> = region
        .par_iter()
        .map(|&i| {
            let p = ic.point(i);
            let (g, d0) = image_index.nearest(p).unwrap();
            refine(&surface, coords[g].clone(), p, d0, h)
        })
        .collect();
    let (worst, one_sided) = distances
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (k, &d)| if d > acc.1 { (k, d) } else { acc });

    let mut reverse = None;
    let mut worst_image = None;
    if symmetric {
        let mut best = 0.0f64;
        for img in &images {
            if linalg::dist(img, &c.anchor) > theta {
                continue;
            }
            let d = ic.index.nearest(img).map(|(_, d)| d).unwrap_or(f64::INFINITY);
            if d > best {
                best = d;
                worst_image = Some(img.clone());
            }
        }
        reverse = Some(best);
    }
    Ok(Containment {
        one_sided,
        reverse,
        grid_spacing: spacing,
        samples: region.len(),
        worst_sample: region[worst],
        worst_image,
    })
}

fn refine(surface: &impl Fn(&[f64]) -> Vec<f64>, mut t: Vec<f64>, p: &[f64], d0: f64, h: f64) -> f64 {
    let n = t.len();
    let mut best = d0;
    let mut value = surface(&t);
    for _ in 0..REFINE_STEPS {
        let resid = linalg::sub(&value, p);
        let mut jac = DMatrix::zeros(p.len(), n);
        for a in 0..n {
            let mut ta = t.clone();
            ta[a] += h;
            let va = surface(&ta);
            for r in 0..p.len() {
                jac[(r, a)] = (va[r] - value[r]) / h;
            }
        }
        let jt = jac.transpose();
        let Some(chol) = (&jt * &jac).cholesky() else {
            break;
        };
        let step = chol.solve(&(&jt * DVector::from_column_slice(&resid)));
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..4 {
            let trial: Vec<f64> = t.iter().zip(step.iter()).map(|(x, s)| x - scale * s).collect();
            let v = surface(&trial);
            let d = linalg::dist(&v, p);
            if d < best {
                best = d;
                t = trial;
                value = v;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved || best <= 1e-15 {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccbp::{CcbpLevel, CcbpNode};
    use crate::geometry::AffinePlane;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn node(center: Vec<f64>, plane: &AffinePlane) -> CcbpNode {
        CcbpNode {
            plane: plane.through(&center),
            raw: center.clone(),
            center,
            sample: None,
        }
    }

    fn flat_ccbp() -> Ccbp {
        let plane = AffinePlane::coordinate(vec![0.0; 3], 2);
        let mut nodes = Vec::new();
        for i in -2..=2 {
            for j in -2..=2 {
                nodes.push(node(vec![i as f64 * 0.2, j as f64 * 0.2, 0.0], &plane));
            }
        }
        let level = CcbpLevel { radius: 0.1, nodes };
        Ccbp::from_parts(vec![0.0; 3], 0.5, vec![level], 12).unwrap()
    }

    #[test]
    fn bump_profile() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(8.0), 1.0);
        assert_eq!(bump(10.0), 0.0);
        assert_eq!(bump(50.0), 0.0);
        assert!((bump(9.0) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=200 {
            let v = bump(8.0 + i as f64 * 0.01);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        // second derivative vanishes at both ends
        let h = 1e-4;
        for t in [8.0, 10.0] {
            let d2 = (bump(t + h) - 2.0 * bump(t) + bump(t - h)) / (h * h);
            assert!(d2.abs() < 1e-2, "{d2}");
        }
    }

    #[test]
    fn weights_away_isolated_and_symmetric() {
        let plane = AffinePlane::coordinate(vec![0.0, 0.0], 1);
        let single = Ccbp::from_parts(
            vec![0.0, 0.0],
            1.0,
            vec![CcbpLevel {
                radius: 0.1,
                nodes: vec![node(vec![0.0, 0.0], &plane)],
            }],
            0,
        )
        .unwrap();
        let far = partition_weights(&single, 0, &[5.0, 0.0]);
        assert!(far.weights.is_empty());
        assert_eq!(far.background, 1.0);
        let at = partition_weights(&single, 0, &[0.0, 0.0]);
        assert_eq!(at.weights, vec![(0, 1.0)]);
        assert_eq!(at.background, 0.0);

        let pair = Ccbp::from_parts(
            vec![0.0, 0.0],
            1.0,
            vec![CcbpLevel {
                radius: 0.1,
                nodes: vec![node(vec![-0.3, 0.0], &plane), node(vec![0.3, 0.0], &plane)],
            }],
            0,
        )
        .unwrap();
        for y in [[0.0, 0.0], [0.0, 0.5], [0.0, 0.85]] {
            let p = partition_weights(&pair, 0, &y);
            assert_eq!(p.weights.len(), 2);
            assert!((p.weights[0].1 - p.weights[1].1).abs() < 1e-15);
            let total: f64 = p.weights.iter().map(|w| w.1).sum::<f64>() + p.background;
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_pipeline_is_identity() {
        let c = flat_ccbp();
        let pipe = MapPipeline::full(&c);
        let (points, _) = sigma0_grid(&c, 0.4, 0.05);
        for z in &points {
            assert_eq!(&pipe.apply(z), z);
        }
        let far = vec![7.0, -3.0, 0.0];
        assert_eq!(pipe.apply(&far), far);
        let pairs: Vec<(usize, usize)> = (1..points.len()).map(|i| (0, i)).collect();
        let d = distortion(&pipe, &points, &pairs).unwrap();
        assert_eq!((d.min_ratio, d.max_ratio, d.k_est), (1.0, 1.0, 1.0));
        assert!(matches!(
            distortion(&pipe, &points, &[(3, 3)]),
            Err(Error::DegeneratePair(3, 3))
        ));
    }

    #[test]
    fn translated_planes_are_isometric_inside() {
        let shifted = AffinePlane::coordinate(vec![0.0, 0.0, 0.01], 2);
        let c = Ccbp::from_parts(
            vec![0.0; 3],
            1.0,
            vec![CcbpLevel {
                radius: 0.1,
                nodes: vec![CcbpNode {
                    center: vec![0.0, 0.0, 0.01],
                    raw: vec![0.0; 3],
                    sample: None,
                    plane: shifted,
                }],
            }],
            0,
        )
        .unwrap();
        let pipe = MapPipeline::full(&c);
        let points: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![-0.7 + 0.07 * i as f64, 0.01 * i as f64, 0.0])
            .collect();
        for z in &points {
            let img = pipe.apply(z);
            assert!((img[2] - 0.01).abs() < 1e-15);
        }
        let pairs: Vec<(usize, usize)> = (1..points.len()).map(|i| (0, i)).collect();
        let d = distortion(&pipe, &points, &pairs).unwrap();
        assert!((d.min_ratio - 1.0).abs() < 1e-12 && (d.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn displacement_bounded_by_active_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut nodes = Vec::new();
        for i in -3..=3 {
            for j in -3..=3 {
                let center = vec![i as f64 * 0.15, j as f64 * 0.15, rng.gen_range(-0.01..0.01)];
                let tilt: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.1..0.1)).collect();
                let plane = AffinePlane::from_spanning(
                    center.clone(),
                    &[vec![1.0, tilt[0], tilt[1]], vec![tilt[2], 1.0, -tilt[0]]],
                )
                .unwrap();
                nodes.push(node(center, &plane));
            }
        }
        let c = Ccbp::from_parts(vec![0.0; 3], 1.0, vec![CcbpLevel { radius: 0.1, nodes }], 24).unwrap();
        for _ in 0..10_000 {
            let y: Vec<f64> = vec![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-0.1..0.1)];
            let moved = linalg::dist(&sigma_k(&c, 0, &y), &y);
            let bound = partition_weights(&c, 0, &y)
                .weights
                .iter()
                .map(|&(j, _)| c.node(0, j).plane.distance(&y))
                .fold(0.0, f64::max);
            assert!(moved <= bound + 1e-12);
            if partition_weights(&c, 0, &y).weights.is_empty() {
                assert_eq!(sigma_k(&c, 0, &y), y);
            }
        }
    }

    #[test]
    fn flat_containment() {
        let c = flat_ccbp();
        let pipe = MapPipeline::full(&c);
        let coords: Vec<f64> = (0..400)
            .flat_map(|i| [-0.3 + 0.6 * (i % 20) as f64 / 19.0, -0.3 + 0.6 * (i / 20) as f64 / 19.0, 0.0])
            .collect();
        let ic = IndexedCloud::new(crate::geometry::WeightedCloud::new(2, 3, coords, None, 1.0).unwrap());
        let rep = containment_check(&ic, &pipe, 0.3, 0.05, false).unwrap();
        assert!(rep.one_sided <= 1e-12, "{}", rep.one_sided);
    }
}
