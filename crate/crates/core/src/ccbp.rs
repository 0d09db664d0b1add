//! Coherent collections of balls and planes: leveled nets of snapped
//! centers with fitted planes, their compatibility report, and the local
//! incompatibility field used by the bi-Lipschitz budget.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::TangentField;
use crate::error::{Error, Result};
use crate::geometry::{plane_distance_local, AffinePlane};
use crate::index::{mean_spacing_of, IndexedCloud, SpatialIndex};
use crate::linalg;
use crate::planefit::fit_plane;
use crate::tolerance;

/// Fitting radius in units of the level radius.
pub const FIT_FACTOR: f64 = 120.0;
/// Net separation in units of the level radius.
pub const NET_SEPARATION: f64 = 4.0 / 3.0;
/// Snap radius in units of the level radius.
pub const SNAP_FACTOR: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CcbpConfig {
    /// Deepest level index (levels `0..=depth` are attempted).
    pub depth: usize,
    pub lambda: f64,
    /// Center of the working region; the mass centroid when absent.
    pub anchor: Option<Vec<f64>>,
    /// Working-region radius for `lambda < 10`; shrinks by ten per decade
    /// of `lambda`.
    pub region_scale: f64,
    /// Working-region radius over the level-0 radius.
    pub region_factor: f64,
    /// Levels with radius below this multiple of the sample spacing are
    /// dropped.
    pub spacing_factor: f64,
}

impl Default for CcbpConfig {
    fn default() -> Self {
        Self {
            depth: 6,
            lambda: 1.0,
            anchor: None,
            region_scale: 1.0,
            region_factor: 10.0,
            spacing_factor: tolerance::LEVEL_SPACING_FACTOR,
        }
    }
}

impl CcbpConfig {
    /// `l0` with `10^l0 <= lambda < 10^(l0+1)`.
    pub fn l0(&self) -> i32 {
        self.lambda.max(1.0).log10().floor() as i32
    }

    pub fn region_radius(&self) -> f64 {
        self.region_scale * 10f64.powi(-self.l0())
    }

    pub fn level_radius(&self, k: usize) -> f64 {
        self.region_radius() / self.region_factor * 10f64.powi(-(k as i32))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcbpNode {
    /// Snapped center.
    pub center: Vec<f64>,
    /// Net point before snapping.
    pub raw: Vec<f64>,
    /// Sample index of the snapped center, when it is a cloud sample.
    pub sample: Option<usize>,
    pub plane: AffinePlane,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcbpLevel {
    pub radius: f64,
    pub nodes: Vec<CcbpNode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ccbp {
    pub l0: i32,
    pub lambda: f64,
    pub anchor: Vec<f64>,
    pub region_radius: f64,
    pub levels: Vec<CcbpLevel>,
    pub sigma0: AffinePlane,
    /// Level-0 node whose plane is `sigma0`.
    pub sigma0_node: usize,
    /// Indices of requested levels that were dropped for resolution.
    pub dropped: Vec<usize>,
    #[serde(skip)]
    centers: Vec<SpatialIndex>,
}

impl Ccbp {
    /// Assembles a collection from explicit levels (used for handmade
    /// collections and after deserialization).
    pub fn from_parts(
        anchor: Vec<f64>,
        region_radius: f64,
        levels: Vec<CcbpLevel>,
        sigma0_node: usize,
    ) -> Result<Self> {
        let first = levels.first().ok_or(Error::EmptyRegion)?;
        let sigma0 = first
            .nodes
            .get(sigma0_node)
            .ok_or(Error::EmptyRegion)?
            .plane
            .clone();
        let mut c = Self {
            l0: 0,
            lambda: 1.0,
            anchor,
            region_radius,
            levels,
            sigma0,
            sigma0_node,
            dropped: Vec::new(),
            centers: Vec::new(),
        };
        c.rebuild_index();
        Ok(c)
    }

    /// Rebuilds the per-level center indices.
    pub fn rebuild_index(&mut self) {
        let dim = self.anchor.len();
        self.centers = self
            .levels
            .iter()
            .map(|l| {
                let coords: Vec<f64> = l.nodes.iter().flat_map(|n| n.center.iter().copied()).collect();
                SpatialIndex::build(&coords, dim)
            })
            .collect();
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.levels[k].radius
    }

    pub fn node(&self, k: usize, j: usize) -> &CcbpNode {
        &self.levels[k].nodes[j]
    }

    /// Level-`k` nodes with center within distance `< s` of `y`.
    pub fn nodes_near(&self, k: usize, y: &[f64], s: f64) -> Vec<usize> {
        self.centers[k]
            .within(y, s)
            .into_iter()
            .filter(|&j| linalg::dist(&self.levels[k].nodes[j].center, y) < s)
            .collect()
    }

    /// Checks separation, descent and plane incidence; returns the first
    /// violation as an error message.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        for (k, level) in self.levels.iter().enumerate() {
            let r = level.radius;
            for (j, node) in level.nodes.iter().enumerate() {
                for i in self.centers[k].within(&node.center, r) {
                    if i != j && linalg::dist(&level.nodes[i].center, &node.center) < r {
                        return Err(format!("level {k}: nodes {i} and {j} closer than {r}"));
                    }
                }
                if node.plane.distance(&node.center) > 1e-12 * r.max(1.0) {
                    return Err(format!("level {k}: plane of node {j} misses its center"));
                }
                if k >= 1 && self.nodes_near(k - 1, &node.center, 2.0 * self.radius(k - 1)).is_empty() {
                    return Err(format!("level {k}: node {j} outside the previous level's double balls"));
                }
            }
        }
        Ok(())
    }
}

/// Greedy maximal `4 r / 3`-separated subset of the candidate samples in
/// index order, with `seed` (if any) placed first. Candidates are the
/// samples of the closed working ball, restricted for finer levels to the
/// open double balls of the previous level.
pub fn build_net(
    ic: &IndexedCloud,
    anchor: &[f64],
    region_radius: f64,
    r: f64,
    previous: Option<&CcbpLevel>,
    seed: Option<usize>,
) -> Result<Vec<usize>> {
    let mut candidates = ic.index.within(anchor, region_radius);
    if let Some(prev) = previous {
        let dim = anchor.len();
        let coords: Vec<f64> = prev.nodes.iter().flat_map(|n| n.center.iter().copied()).collect();
        let pidx = SpatialIndex::build(&coords, dim);
        let reach = 2.0 * prev.radius;
        candidates.retain(|&i| {
            let p = ic.point(i);
            pidx.within(p, reach)
                .into_iter()
                .any(|j| linalg::dist(&prev.nodes[j].center, p) < reach)
        });
    }
    if candidates.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if let Some(s) = seed {
        if let Some(pos) = candidates.iter().position(|&i| i == s) {
            candidates.remove(pos);
            candidates.insert(0, s);
        }
    }
    let sep = NET_SEPARATION * r;
    let cell = sep;
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / cell).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut net = Vec::new();
    for i in candidates {
        let p = ic.point(i);
        let k = key(p);
        if neighbors_within(&grid, &k, |j| linalg::dist(ic.point(j), p) < sep) {
            continue;
        }
        grid.entry(k).or_default().push(i);
        net.push(i);
    }
    Ok(net)
}

/// Whether any stored index in the 3^dim block of cells around `k`
/// satisfies `hit`.
fn neighbors_within(
    grid: &HashMap<Vec<i64>, Vec<usize>>,
    k: &[i64],
    hit: impl Fn(usize) -> bool,
) -> bool {
    let dim = k.len();
    let total = 3usize.pow(dim as u32);
    let mut probe = k.to_vec();
    for code in 0..total {
        let mut c = code;
        for a in 0..dim {
            probe[a] = k[a] + (c % 3) as i64 - 1;
            c /= 3;
        }
        if let Some(list) = grid.get(&probe) {
            if list.iter().any(|&j| hit(j)) {
                return true;
            }
        }
    }
    false
}

/// Fits a plane at each raw center (radius `120 r`, averaging over
/// `lambda` times that) and snaps the center to the sample of
/// `B(raw, r/6)` closest to the plane; the node plane is the fitted plane
/// translated through the snapped center.
pub fn snap_and_assign(
    ic: &IndexedCloud,
    field: &TangentField,
    raws: &[Vec<f64>],
    level: usize,
    r: f64,
    lambda: f64,
) -> Result<Vec<CcbpNode>> {
    raws.par_iter()
        .enumerate()
        .map(|(j, raw)| {
            let fit = fit_plane(ic, field, raw, FIT_FACTOR * r, lambda)?;
            // ties: closer to the raw center, then smaller index
            let mut best: Option<(usize, f64, f64)> = None;
            for i in ic.index.within_unordered(raw, SNAP_FACTOR * r) {
                let d = fit.plane.distance(ic.point(i));
                let e = linalg::dist(ic.point(i), raw);
                let better = best
                    .map(|(bi, bd, be)| (d, e, i) < (bd, be, bi))
                    .unwrap_or(true);
                if better {
                    best = Some((i, d, e));
                }
            }
            let (i, _, _) = best.ok_or(Error::SnapFailed { level, node: j })?;
            let center = ic.point(i).to_vec();
            Ok(CcbpNode {
                plane: fit.plane.through(&center),
                center,
                raw: raw.clone(),
                sample: Some(i),
            })
        })
        .collect()
}

/// Builds the collection level by level from the configuration.
pub fn build_ccbp(ic: &IndexedCloud, field: &TangentField, config: &CcbpConfig) -> Result<Ccbp> {
    let anchor = config.anchor.clone().unwrap_or_else(|| ic.cloud.centroid());
    if anchor.len() != ic.dim_ambient() {
        return Err(Error::DimensionMismatch {
            expected: ic.dim_ambient(),
            got: anchor.len(),
        });
    }
    let region_radius = config.region_radius();
    let region = ic.index.within(&anchor, region_radius);
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let spacing = mean_spacing_of(&ic.cloud, &ic.index, region.iter().copied());
    let seed = ic.index.nearest(&anchor).map(|(i, _)| i);

    let mut levels: Vec<CcbpLevel> = Vec::new();
    let mut dropped = Vec::new();
    for k in 0..=config.depth {
        let r = config.level_radius(k);
        if k > 0 && r < config.spacing_factor * spacing {
            log::warn!(
                "dropping levels {k}..={} (radius {r:.3e} below {} x spacing {spacing:.3e})",
                config.depth,
                config.spacing_factor
            );
            dropped.extend(k..=config.depth);
            break;
        }
        let net = build_net(
            ic,
            &anchor,
            region_radius,
            r,
            levels.last(),
            if k == 0 { seed } else { None },
        )?;
        let raws: Vec<Vec<f64>> = net.iter().map(|&i| ic.point(i).to_vec()).collect();
        let nodes = snap_and_assign(ic, field, &raws, k, r, config.lambda)?;
        log::debug!("level {k}: radius {r:.3e}, {} nodes", nodes.len());
        levels.push(CcbpLevel { radius: r, nodes });
    }
    let mut c = Ccbp::from_parts(anchor, region_radius, levels, 0)?;
    c.l0 = config.l0();
    c.lambda = config.lambda;
    c.dropped = dropped;
    Ok(c)
}

/// One compatibility maximum with the node pair realizing it.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Offender {
    pub value: f64,
    /// `(level, node)` at whose center the distance is measured.
    pub at: (usize, usize),
    pub other: (usize, usize),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CompatReport {
    /// `max_j d(x_j0, sigma0) / r_0`.
    pub eps_initial: f64,
    pub eps_sigma0: f64,
    pub eps_same_level: f64,
    pub eps_cross_level: f64,
    pub worst_initial: Offender,
    pub worst_sigma0: Offender,
    pub worst_same_level: Offender,
    pub worst_cross_level: Offender,
    /// Per-level maxima of the same-level check.
    pub same_level_by_level: Vec<f64>,
    /// Per-level maxima of the cross-level check (level `k` against `k+1`).
    pub cross_level_by_level: Vec<f64>,
}

impl CompatReport {
    pub fn max(&self) -> f64 {
        self.eps_initial
            .max(self.eps_sigma0)
            .max(self.eps_same_level)
            .max(self.eps_cross_level)
    }
}

/// Normalized local distance; a plane missing the ball scores its
/// normalized distance from the center (always above one).
fn local_distance(e: &AffinePlane, f: &AffinePlane, x: &[f64], r: f64) -> f64 {
    match plane_distance_local(e, f, x, r) {
        Ok(v) => v,
        Err(_) => e.distance(x).max(f.distance(x)) / r,
    }
}

fn fold_max(items: impl ParallelIterator<Item = Offender>) -> Offender {
    items.reduce(Offender::default, |a, b| {
        if b.value > a.value || (b.value == a.value && (b.at, b.other) < (a.at, a.other)) {
            b
        } else {
            a
        }
    })
}

/// Maxima of every compatibility condition over the qualifying pairs.
pub fn validate_ccbp(c: &Ccbp) -> CompatReport {
    let mut rep = CompatReport::default();
    let Some(level0) = c.levels.first() else {
        return rep;
    };
    let r0 = level0.radius;
    let root = (0, c.sigma0_node);

    rep.worst_initial = fold_max(level0.nodes.par_iter().enumerate().map(|(j, n)| Offender {
        value: c.sigma0.distance(&n.center) / r0,
        at: (0, j),
        other: root,
    }));
    rep.worst_sigma0 = fold_max(level0.nodes.par_iter().enumerate().map(|(i, n)| Offender {
        value: local_distance(&n.plane, &c.sigma0, &n.center, 100.0 * r0),
        at: (0, i),
        other: root,
    }));

    for (k, level) in c.levels.iter().enumerate() {
        let rk = level.radius;
        let same = fold_max(level.nodes.par_iter().enumerate().flat_map_iter(|(i, ni)| {
            c.nodes_near(k, &ni.center, 100.0 * rk * (1.0 + 1e-12))
                .into_iter()
                .filter(move |&j| j != i && linalg::dist(&ni.center, &c.levels[k].nodes[j].center) <= 100.0 * rk)
                .map(move |j| Offender {
                    value: local_distance(&ni.plane, &c.levels[k].nodes[j].plane, &ni.center, 100.0 * rk),
                    at: (k, i),
                    other: (k, j),
                })
        }));
        rep.same_level_by_level.push(same.value);
        if same.value > rep.worst_same_level.value {
            rep.worst_same_level = same;
        }
        if k + 1 < c.levels.len() {
            let cross = fold_max(level.nodes.par_iter().enumerate().flat_map_iter(|(i, ni)| {
                c.nodes_near(k + 1, &ni.center, 2.0 * rk * (1.0 + 1e-12))
                    .into_iter()
                    .filter(move |&j| linalg::dist(&ni.center, &c.levels[k + 1].nodes[j].center) <= 2.0 * rk)
                    .map(move |j| Offender {
                        value: local_distance(
                            &ni.plane,
                            &c.levels[k + 1].nodes[j].plane,
                            &ni.center,
                            20.0 * rk,
                        ),
                        at: (k, i),
                        other: (k + 1, j),
                    })
            }));
            rep.cross_level_by_level.push(cross.value);
            if cross.value > rep.worst_cross_level.value {
                rep.worst_cross_level = cross;
            }
        }
    }
    rep.eps_initial = rep.worst_initial.value;
    rep.eps_sigma0 = rep.worst_sigma0.value;
    rep.eps_same_level = rep.worst_same_level.value;
    rep.eps_cross_level = rep.worst_cross_level.value;
    rep
}

/// Local incompatibility at `y` for level `k >= 1`: the largest
/// `d_{x_im, 100 r_m}(P_jk, P_im)` over `m in {k, k-1}` and node pairs with
/// `y` in `10 B_jk` and in `11 B_im`; zero when no pair qualifies.
pub fn epsilon_prime(c: &Ccbp, k: usize, y: &[f64]) -> f64 {
    epsilon_prime_filtered(c, k, y, |_, _| true)
}

/// [`epsilon_prime`] over the pairs accepted by `keep((k, j), (m, i))`.
pub fn epsilon_prime_filtered(
    c: &Ccbp,
    k: usize,
    y: &[f64],
    keep: impl Fn((usize, usize), (usize, usize)) -> bool,
) -> f64 {
    if k == 0 || k >= c.levels.len() {
        return 0.0;
    }
    let mut best = 0.0f64;
    let own = c.nodes_near(k, y, 10.0 * c.radius(k));
    if own.is_empty() {
        return 0.0;
    }
    for m in [k, k - 1] {
        let rm = c.radius(m);
        let others = c.nodes_near(m, y, 11.0 * rm);
        for &j in &own {
            for &i in &others {
                if !keep((k, j), (m, i)) {
                    continue;
                }
                let center = &c.node(m, i).center;
                let v = local_distance(&c.node(k, j).plane, &c.node(m, i).plane, center, 100.0 * rm);
                best = best.max(v);
            }
        }
    }
    best
}

/// Precomputed incompatibility partners: for every node `j` of level
/// `k >= 1`, the pairs `(value, m, i)` that can qualify together at some
/// point, sorted by decreasing value. Lookups stop at the first partner
/// whose `11 B_im` contains the query point.
#[derive(Debug, Clone, Default)]
pub struct EpsilonTable {
    partners: Vec<Vec<Vec<(f64, usize, usize)>>>,
}

impl EpsilonTable {
    pub fn build(c: &Ccbp) -> Self {
        let mut partners = vec![Vec::new()];
        for k in 1..c.depth() {
            let rk = c.radius(k);
            let level: Vec<Vec<(f64, usize, usize)>> = (0..c.levels[k].nodes.len())
                .into_par_iter()
                .map(|j| {
                    let node = c.node(k, j);
                    let mut list = Vec::new();
                    for m in [k, k - 1] {
                        let rm = c.radius(m);
                        for i in c.nodes_near(m, &node.center, 10.0 * rk + 11.0 * rm) {
                            let other = c.node(m, i);
                            let v = local_distance(&node.plane, &other.plane, &other.center, 100.0 * rm);
                            list.push((v, m, i));
                        }
                    }
                    list.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
                    list
                })
                .collect();
            partners.push(level);
        }
        Self { partners }
    }

    /// Same value as [`epsilon_prime`].
    pub fn epsilon_prime(&self, c: &Ccbp, k: usize, y: &[f64]) -> f64 {
        if k == 0 || k >= c.depth() {
            return 0.0;
        }
        let mut best = 0.0f64;
        for j in c.nodes_near(k, y, 10.0 * c.radius(k)) {
            for &(v, m, i) in &self.partners[k][j] {
                if v <= best {
                    break;
                }
                if linalg::dist(&c.node(m, i).center, y) < 11.0 * c.radius(m) {
                    best = v;
                    break;
                }
            }
        }
        best
    }
}
