//! Discrete metric-measure diagnostics on a neighbor graph: geodesic
//! quasiconvexity, local Lipschitz constants, tangential gradients, upper
//! gradient checks and Poincare ratios.

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use petgraph::unionfind::UnionFind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::TangentField;
use crate::error::{Error, Result};
use crate::geometry::ProjMatrix;
use crate::index::IndexedCloud;
use crate::linalg;
use crate::tolerance;

/// Undirected graph on the samples with edges between points closer than
/// `radius`, weighted by Euclidean length.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    pub graph: UnGraph<(), f64>,
    pub radius: f64,
    component: Vec<usize>,
    sizes: Vec<usize>,
}

impl NeighborGraph {
    pub fn build(ic: &IndexedCloud, radius: f64) -> Self {
        let count = ic.cloud.len();
        let mut graph = UnGraph::with_capacity(count, count * 8);
        for _ in 0..count {
            graph.add_node(());
        }
        let mut uf = UnionFind::new(count);
        for i in 0..count {
            let p = ic.point(i);
            for j in ic.index.within(p, radius) {
                if j > i {
                    graph.add_edge(NodeIndex::new(i), NodeIndex::new(j), linalg::dist(p, ic.point(j)));
                    uf.union(i, j);
                }
            }
        }
        let labels = uf.into_labeling();
        let mut ids = std::collections::HashMap::new();
        let mut sizes = Vec::new();
        let component = labels
            .iter()
            .map(|l| {
                let id = *ids.entry(*l).or_insert_with(|| {
                    sizes.push(0);
                    sizes.len() - 1
                });
                sizes[id] += 1;
                id
            })
            .collect();
        Self {
            graph,
            radius,
            component,
            sizes,
        }
    }

    pub fn default_radius(ic: &IndexedCloud) -> f64 {
        tolerance::GRAPH_RADIUS_FACTOR * ic.mean_spacing()
    }

    pub fn component(&self, i: usize) -> usize {
        self.component[i]
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.graph.neighbors(NodeIndex::new(i)).map(|v| v.index())
    }

    pub fn shortest_path_length(&self, a: usize, b: usize) -> Option<f64> {
        let goal = NodeIndex::new(b);
        dijkstra(&self.graph, NodeIndex::new(a), Some(goal), |e| *e.weight())
            .get(&goal)
            .copied()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Quasiconvexity {
    pub kappa: f64,
    pub worst_pair: (usize, usize),
    /// Path length over chord length, aligned with the input pairs
    /// (coincident pairs get 1).
    pub ratios: Vec<f64>,
}

/// Max over the pairs of graph geodesic length over Euclidean distance.
pub fn quasiconvexity(ic: &IndexedCloud, graph: &NeighborGraph, pairs: &[(usize, usize)]) -> Result<Quasiconvexity> {
    if pairs
        .iter()
        .any(|&(a, b)| graph.component(a) != graph.component(b))
    {
        return Err(Error::Disconnected {
            sizes: graph.component_sizes().to_vec(),
        });
    }
    let ratios: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let chord = linalg::dist(ic.point(a), ic.point(b));
            if chord == 0.0 {
                return 1.0;
            }
            graph.shortest_path_length(a, b).unwrap_or(f64::INFINITY) / chord
        })
        .collect();
    let (k, kappa) = ratios
        .iter()
        .enumerate()
        .fold((0, 1.0f64), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    Ok(Quasiconvexity {
        kappa,
        worst_pair: pairs.get(k).copied().unwrap_or((0, 0)),
        ratios,
    })
}

/// Test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FieldSpec {
    Constant { value: f64 },
    Linear { a: Vec<f64>, b: f64 },
    Coordinate { axis: usize },
    Distance { point: Vec<f64> },
    SquaredNorm,
    /// Sum of `count` hinges `max(0, <a, y> + b)` with unit `a`; directions
    /// and offsets drawn from `seed`.
    Hinges { seed: u64, count: usize, dim: usize },
}

impl FieldSpec {
    fn hinges(seed: u64, count: usize, dim: usize) -> Vec<(Vec<f64>, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let mut a: Vec<f64> = loop {
                    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let s = linalg::norm(&v);
                    if s > 0.1 && s <= 1.0 {
                        break v;
                    }
                };
                linalg::normalize(&mut a);
                (a, rng.gen_range(-0.5..0.5))
            })
            .collect()
    }

    pub fn eval_all(&self, ic: &IndexedCloud) -> ScalarField {
        let hinges = match self {
            FieldSpec::Hinges { seed, count, dim } => Self::hinges(*seed, *count, *dim),
            _ => Vec::new(),
        };
        let values = ic
            .cloud
            .points()
            .map(|y| match self {
                FieldSpec::Constant { value } => *value,
                FieldSpec::Linear { a, b } => linalg::dot(a, y) + b,
                FieldSpec::Coordinate { axis } => y[*axis],
                FieldSpec::Distance { point } => linalg::dist(point, y),
                FieldSpec::SquaredNorm => linalg::dot(y, y),
                FieldSpec::Hinges { .. } => hinges
                    .iter()
                    .map(|(a, b)| (linalg::dot(a, y) + b).max(0.0))
                    .sum(),
            })
            .collect();
        ScalarField {
            values,
            spec: Some(self.clone()),
        }
    }

    /// The random Lipschitz family used for empirical Poincare constants.
    pub fn hinge_family(size: usize, dim: usize, seed: u64) -> Vec<FieldSpec> {
        (0..size as u64)
            .map(|k| FieldSpec::Hinges {
                seed: seed.wrapping_add(k),
                count: 5,
                dim,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub spec: Option<FieldSpec>,
}

impl ScalarField {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, spec: None }
    }

    pub fn constant(count: usize, value: f64) -> Self {
        Self::from_values(vec![value; count])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Largest difference quotient from sample `i` to its graph neighbors.
pub fn lip_constant(ic: &IndexedCloud, graph: &NeighborGraph, field: &ScalarField, i: usize) -> Result<f64> {
    let mut best: Option<f64> = None;
    for j in graph.neighbors(i) {
        let d = linalg::dist(ic.point(i), ic.point(j));
        if d > 0.0 {
            let q = (field.values[j] - field.values[i]).abs() / d;
            best = Some(best.map_or(q, |b: f64| b.max(q)));
        }
    }
    best.ok_or(Error::IsolatedVertex(i))
}

/// Weighted least-squares affine fit of the field over `B_h(p_i)` in the
/// coordinates of the tangent plane; returns the gradient as an ambient
/// vector lying in the tangent plane.
pub fn tangential_gradient(
    ic: &IndexedCloud,
    field: &ScalarField,
    tangent: &ProjMatrix,
    i: usize,
    h: f64,
) -> Result<Vec<f64>> {
    let n = ic.dim_intrinsic();
    let dim = ic.dim_ambient();
    let eig = linalg::symmetric_eigen(tangent.matrix(), tolerance::JACOBI_TOL)?;
    let basis: Vec<Vec<f64>> = (0..n).map(|a| eig.vector(a)).collect();
    let center = ic.point(i);
    let ball = ic.index.within_unordered(center, h);
    if ball.len() < n + 1 {
        return Err(Error::DegenerateNeighborhood(format!(
            "{} samples within {h} of sample {i}",
            ball.len()
        )));
    }
    let m = n + 1;
    let mut normal = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    let mut row = vec![0.0; m];
    for &j in &ball {
        let offset = linalg::sub(ic.point(j), center);
        row[0] = 1.0;
        for a in 0..n {
            row[a + 1] = linalg::dot(&basis[a], &offset);
        }
        let w = ic.cloud.weight(j);
        for a in 0..m {
            rhs[a] += w * row[a] * field.values[j];
            for b in 0..m {
                normal[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let scale = normal[(0, 0)];
    let sol = normal
        .clone()
        .cholesky()
        .filter(|c| {
            let diag = c.l().diagonal();
            diag.iter().all(|v| v * v > tolerance::RANK * scale * h * h)
        })
        .ok_or_else(|| Error::DegenerateNeighborhood(format!("samples near {i} do not span the tangent plane")))?
        .solve(&rhs);
    let mut grad = vec![0.0; dim];
    for a in 0..n {
        linalg::add_scaled(&mut grad, sol[a + 1], &basis[a]);
    }
    Ok(tangent.apply(&grad))
}

/// `sum_edges (rho_i + rho_j)/2 |p_i - p_j| - |f(end) - f(start)|`.
pub fn upper_gradient_check(
    ic: &IndexedCloud,
    graph: &NeighborGraph,
    field: &ScalarField,
    rho: &ScalarField,
    path: &[usize],
) -> Result<f64> {
    let (Some(&first), Some(&last)) = (path.first(), path.last()) else {
        return Err(Error::InvalidPath("empty path".into()));
    };
    let mut integral = 0.0;
    for w in path.windows(2) {
        if graph
            .graph
            .find_edge(NodeIndex::new(w[0]), NodeIndex::new(w[1]))
            .is_none()
        {
            return Err(Error::InvalidPath(format!("no edge {} - {}", w[0], w[1])));
        }
        let len = linalg::dist(ic.point(w[0]), ic.point(w[1]));
        integral += 0.5 * (rho.values[w[0]] + rho.values[w[1]]) * len;
    }
    Ok(integral - (field.values[last] - field.values[first]).abs())
}

/// Vertex sequence of a shortest path.
pub fn geodesic_path(graph: &NeighborGraph, a: usize, b: usize) -> Option<Vec<usize>> {
    let (_, path) = petgraph::algo::astar(
        &graph.graph,
        NodeIndex::new(a),
        |v| v.index() == b,
        |e| *e.weight(),
        |_| 0.0,
    )?;
    Some(path.into_iter().map(|v| v.index()).collect())
}

/// Source of the gradient magnitudes on the right-hand side.
#[derive(Debug, Clone, Copy)]
pub enum GradMode<'a> {
    /// `|grad^M f|` from tangent-plane least squares with radius `h`.
    Tangential { tangents: &'a TangentField, h: f64 },
    /// Discrete local Lipschitz constant on the graph.
    Lip { graph: &'a NeighborGraph },
    /// Given upper gradient values.
    Given { rho: &'a ScalarField },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradKind {
    Tangential,
    Lip,
}

impl GradMode<'_> {
    /// Gradient magnitude at sample `i`; `None` where it is undefined
    /// (invalid tangent or degenerate neighborhood).
    pub fn magnitude(&self, ic: &IndexedCloud, field: &ScalarField, i: usize) -> Result<Option<f64>> {
        match self {
            GradMode::Tangential { tangents, h } => {
                let Some(t) = tangents.get(i) else {
                    return Ok(None);
                };
                match tangential_gradient(ic, field, t, i, *h) {
                    Ok(g) => Ok(Some(linalg::norm(&g))),
                    Err(Error::DegenerateNeighborhood(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            }
            GradMode::Lip { graph } => lip_constant(ic, graph, field, i).map(Some),
            GradMode::Given { rho } => Ok(Some(rho.values[i])),
        }
    }
}

/// Relative size below which the mean oscillation counts as zero.
const CONSTANT_REL: f64 = 1e-12;

/// `mean_{B_r}|f - f_B| / (r (mean_{B_{lambda r}} g^p)^{1/p})`.
pub fn poincare_ratio(
    ic: &IndexedCloud,
    field: &ScalarField,
    x: &[f64],
    r: f64,
    lambda: f64,
    p: f64,
    mode: &GradMode,
) -> Result<f64> {
    let inner = ic.ball(x, r);
    if inner.indices.is_empty() {
        return Err(Error::EmptyBall { radius: r });
    }
    let w = |i: usize| ic.cloud.weight(i);
    let mean = inner.indices.iter().map(|&i| w(i) * field.values[i]).sum::<f64>() / inner.mass;
    let lhs = inner
        .indices
        .iter()
        .map(|&i| w(i) * (field.values[i] - mean).abs())
        .sum::<f64>()
        / inner.mass;
    let size = inner
        .indices
        .iter()
        .map(|&i| field.values[i].abs())
        .fold(0.0, f64::max);
    if lhs <= CONSTANT_REL * size {
        return Ok(0.0);
    }
    let outer = ic.index.within_unordered(x, lambda * r);
    let grads: Vec<Option<(f64, f64)>> = outer
        .par_iter()
        .map(|&i| Ok(mode.magnitude(ic, field, i)?.map(|g| (w(i), g))))
        .collect::<Result<_>>()?;
    let (mass, acc) = grads
        .into_iter()
        .flatten()
        .fold((0.0, 0.0), |(m, a), (wi, g)| (m + wi, a + wi * g.powf(p)));
    if mass == 0.0 {
        return Err(Error::EmptyBall { radius: lambda * r });
    }
    let rhs = (acc / mass).powf(1.0 / p);
    if rhs == 0.0 {
        return Err(Error::ZeroGradientNonconstant);
    }
    Ok(lhs / (r * rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{coordinate_projection, generate, GeneratorKind, GeneratorSpec};
    use crate::geometry::WeightedCloud;

    fn disk(count: usize) -> IndexedCloud {
        IndexedCloud::new(generate(&GeneratorSpec { count, ..GeneratorSpec::new(GeneratorKind::PlaneDisk) }).unwrap().cloud)
    }

    #[test]
    fn graph_is_symmetric_with_exact_weights() {
        let ic = disk(500);
        let g = NeighborGraph::build(&ic, NeighborGraph::default_radius(&ic));
        for e in g.graph.edge_indices() {
            let (a, b) = g.graph.edge_endpoints(e).unwrap();
            assert_eq!(g.graph[e], linalg::dist(ic.point(a.index()), ic.point(b.index())));
            assert!(g.neighbors(b.index()).any(|v| v == a.index()));
        }
        assert_eq!(g.component_sizes(), &[ic.cloud.len()]);
    }

    #[test]
    fn separated_clusters_are_disconnected() {
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64 * 0.01 + if i >= 5 { 10.0 } else { 0.0 }, 0.0])
            .collect();
        let ic = IndexedCloud::new(WeightedCloud::from_points(1, &pts, None).unwrap());
        let g = NeighborGraph::build(&ic, 0.015);
        match quasiconvexity(&ic, &g, &[(0, 9)]) {
            Err(Error::Disconnected { sizes }) => assert_eq!(sizes, vec![5, 5]),
            other => panic!("{other:?}"),
        }
    }

    /// Radius that reaches diagonal grid neighbors; the default only links
    /// axis neighbors on jittered grids.
    fn fine_graph(ic: &IndexedCloud) -> NeighborGraph {
        NeighborGraph::build(ic, 2.5 * ic.mean_spacing())
    }

    #[test]
    fn flat_disk_is_nearly_convex() {
        let ic = disk(2000);
        let g = fine_graph(&ic);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let count = ic.cloud.len();
        let pairs: Vec<(usize, usize)> = (0..200)
            .map(|_| (rng.gen_range(0..count), rng.gen_range(0..count)))
            .filter(|&(a, b)| linalg::dist(ic.point(a), ic.point(b)) > 0.5)
            .collect();
        let q = quasiconvexity(&ic, &g, &pairs).unwrap();
        assert!(q.kappa >= 1.0 && q.kappa <= 1.1, "{}", q.kappa);
    }

    #[test]
    fn lipschitz_constants() {
        let ic = disk(2000);
        let g = fine_graph(&ic);
        let a = vec![0.6, -0.3, 2.0];
        let lin = FieldSpec::Linear { a: a.clone(), b: 0.4 }.eval_all(&ic);
        let target = (0.6f64 * 0.6 + 0.3 * 0.3).sqrt();
        let konst = ScalarField::constant(ic.cloud.len(), 3.0);
        let dist = FieldSpec::Distance { point: vec![0.3, 0.2, 0.5] }.eval_all(&ic);
        for i in (0..ic.cloud.len()).step_by(37) {
            let l = lip_constant(&ic, &g, &lin, i).unwrap();
            assert!((l - target).abs() <= 0.1 * target, "{l}");
            assert_eq!(lip_constant(&ic, &g, &konst, i).unwrap(), 0.0);
            assert!(lip_constant(&ic, &g, &dist, i).unwrap() <= 1.0 + 1e-9);
        }
        let lone = IndexedCloud::new(WeightedCloud::from_points(1, &[vec![0.0, 0.0], vec![5.0, 0.0]], None).unwrap());
        let lg = NeighborGraph::build(&lone, 1.0);
        let f = ScalarField::constant(2, 1.0);
        assert!(matches!(lip_constant(&lone, &lg, &f, 0), Err(Error::IsolatedVertex(0))));
    }

    #[test]
    fn tangential_gradients() {
        let ic = disk(2000);
        let t = coordinate_projection(3, 2);
        let h = 2.0 * ic.mean_spacing();
        let a = vec![0.6, -0.3, 2.0];
        let lin = FieldSpec::Linear { a: a.clone(), b: 0.4 }.eval_all(&ic);
        let normal = FieldSpec::Coordinate { axis: 2 }.eval_all(&ic);
        for i in (0..ic.cloud.len()).step_by(41) {
            let g = tangential_gradient(&ic, &lin, &t, i, h).unwrap();
            assert!(linalg::dist(&g, &[0.6, -0.3, 0.0]) < 1e-8);
            let z = tangential_gradient(&ic, &normal, &t, i, h).unwrap();
            assert!(linalg::norm(&z) < 1e-12);
        }
        let sphere = generate(&GeneratorSpec::new(GeneratorKind::SphereCap)).unwrap();
        let tangents = sphere.tangents.unwrap();
        let ic = IndexedCloud::new(sphere.cloud);
        let sq = FieldSpec::SquaredNorm.eval_all(&ic);
        let h = 2.0 * ic.mean_spacing();
        for i in (0..ic.cloud.len()).step_by(29) {
            if let Ok(g) = tangential_gradient(&ic, &sq, tangents.get(i).unwrap(), i, h) {
                assert!(linalg::norm(&g) < 0.05);
            }
        }
        assert!(matches!(
            tangential_gradient(&ic, &sq, tangents.get(0).unwrap(), 0, 1e-9),
            Err(Error::DegenerateNeighborhood(_))
        ));
    }

    #[test]
    fn upper_gradient_slack() {
        let ic = disk(1000);
        let g = NeighborGraph::build(&ic, NeighborGraph::default_radius(&ic));
        let f = FieldSpec::Hinges { seed: 9, count: 5, dim: 3 }.eval_all(&ic);
        let count = ic.cloud.len();
        let lip = ScalarField::constant(count, 5.0);
        let zero = ScalarField::constant(count, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut violations = 0;
        for _ in 0..50 {
            let path = geodesic_path(&g, rng.gen_range(0..count), rng.gen_range(0..count)).unwrap();
            assert!(upper_gradient_check(&ic, &g, &f, &lip, &path).unwrap() >= 0.0);
            let s = upper_gradient_check(&ic, &g, &f, &zero, &path).unwrap();
            let first = path[0];
            let last = *path.last().unwrap();
            if f.values[first] != f.values[last] {
                assert!(s < 0.0);
                violations += 1;
            }
        }
        assert!(violations > 0);
        assert!(matches!(
            upper_gradient_check(&ic, &g, &f, &lip, &[0, 0]),
            Err(Error::InvalidPath(_))
        ));
    }

    #[test]
    fn ratio_invariances() {
        let ic = disk(2000);
        let g = NeighborGraph::build(&ic, NeighborGraph::default_radius(&ic));
        let tangents = TangentField::constant(ic.cloud.len(), coordinate_projection(3, 2));
        let h = 2.0 * ic.mean_spacing();
        let f = FieldSpec::Hinges { seed: 2, count: 5, dim: 3 }.eval_all(&ic);
        let konst = ScalarField::constant(ic.cloud.len(), 7.5);
        let x = [0.1, -0.2, 0.0];
        for mode in [GradMode::Tangential { tangents: &tangents, h }, GradMode::Lip { graph: &g }] {
            assert_eq!(poincare_ratio(&ic, &konst, &x, 0.4, 1.0, 2.0, &mode).unwrap(), 0.0);
            let base = poincare_ratio(&ic, &f, &x, 0.4, 2.0, 2.0, &mode).unwrap();
            let moved = poincare_ratio(&ic, &f.map(|v| -3.0 * v + 11.0), &x, 0.4, 2.0, 2.0, &mode).unwrap();
            assert!((base - moved).abs() <= 1e-9 * base, "{base} {moved}");
        }
        let zero = ScalarField::constant(ic.cloud.len(), 0.0);
        assert!(matches!(
            poincare_ratio(&ic, &f, &x, 0.4, 1.0, 2.0, &GradMode::Given { rho: &zero }),
            Err(Error::ZeroGradientNonconstant)
        ));
        assert!(matches!(
            poincare_ratio(&ic, &f, &[9.0, 9.0, 9.0], 0.4, 1.0, 2.0, &GradMode::Given { rho: &zero }),
            Err(Error::EmptyBall { .. })
        ));
    }

    #[test]
    fn disk_linear_ratio_matches_quadrature() {
        // mean of |y_1| over the unit disk by polar midpoint quadrature
        let (nr, nt) = (400, 800);
        let mut acc = 0.0;
        for a in 0..nr {
            let rho = (a as f64 + 0.5) / nr as f64;
            for b in 0..nt {
                let t = (b as f64 + 0.5) / nt as f64 * std::f64::consts::TAU;
                acc += (rho * t.cos()).abs() * rho;
            }
        }
        let oracle = acc * std::f64::consts::TAU / (nr * nt) as f64 / std::f64::consts::PI;
        assert!((oracle - 4.0 / (3.0 * std::f64::consts::PI)).abs() < 1e-5);

        let ic = disk(4000);
        let tangents = TangentField::constant(ic.cloud.len(), coordinate_projection(3, 2));
        let h = 2.0 * ic.mean_spacing();
        let f = FieldSpec::Coordinate { axis: 0 }.eval_all(&ic);
        let mode = GradMode::Tangential { tangents: &tangents, h };
        let ratio = poincare_ratio(&ic, &f, &[0.0; 3], 1.0, 1.0, 2.0, &mode).unwrap();
        assert!((ratio - oracle).abs() <= 0.05 * oracle, "{ratio} vs {oracle}");
    }
}
