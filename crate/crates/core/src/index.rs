//! Static kd-tree over a flat coordinate buffer, used for closed-ball and
//! nearest-neighbor queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::WeightedCloud;
use crate::linalg::dist2;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
        lo: Vec<f64>,
        hi: Vec<f64>,
        start: usize,
        end: usize,
    },
}

/// Read-only spatial index; results are identical to a linear scan.
#[derive(Debug, Clone, Default)]
pub struct SpatialIndex {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    root_lo: Vec<f64>,
    root_hi: Vec<f64>,
}

/// Hits of a closed-ball query (in tree order) and their total mass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BallHits {
    pub indices: Vec<usize>,
    pub mass: f64,
}

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl SpatialIndex {
    /// Builds the tree over row-major `coords` with points of length `dim`.
    pub fn build(coords: &[f64], dim: usize) -> Self {
        let count = coords.len() / dim.max(1);
        let mut index = Self {
            dim,
            coords: coords.to_vec(),
            order: (0..count).collect(),
            nodes: Vec::new(),
            root_lo: vec![f64::INFINITY; dim],
            root_hi: vec![f64::NEG_INFINITY; dim],
        };
        for p in coords.chunks_exact(dim) {
            for a in 0..dim {
                index.root_lo[a] = index.root_lo[a].min(p[a]);
                index.root_hi[a] = index.root_hi[a].max(p[a]);
            }
        }
        if count > 0 {
            index.build_node(0, count);
        }
        index
    }

    pub fn for_cloud(cloud: &WeightedCloud) -> Self {
        Self::build(cloud.coords(), cloud.dim_ambient())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    #[inline]
    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &i in &self.order[start..end] {
            let p = &self.coords[i * self.dim..(i + 1) * self.dim];
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..self.dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] == 0.0 {
            return id;
        }
        let mid = (start + end) / 2;
        let dim = self.dim;
        let coords = &self.coords;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            coords[i * dim + axis]
                .total_cmp(&coords[j * dim + axis])
                .then(i.cmp(&j))
        });
        let value = self.coords[self.order[mid] * dim + axis];
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
            lo,
            hi,
            start,
            end,
        };
        id
    }

    fn box_dist2(lo: &[f64], hi: &[f64], q: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..q.len() {
            let d = if q[a] < lo[a] {
                lo[a] - q[a]
            } else if q[a] > hi[a] {
                q[a] - hi[a]
            } else {
                0.0
            };
            s += d * d;
        }
        s
    }

    fn box_far_dist2(lo: &[f64], hi: &[f64], q: &[f64]) -> f64 {
        (0..q.len())
            .map(|a| {
                let d = (q[a] - lo[a]).abs().max((hi[a] - q[a]).abs());
                d * d
            })
            .sum()
    }

    /// Indices with `|p_i - x| <= r`, ascending.
    pub fn within(&self, x: &[f64], r: f64) -> Vec<usize> {
        let mut out = self.within_unordered(x, r);
        out.sort_unstable();
        out
    }

    /// Same set as [`Self::within`] in tree order (deterministic, unsorted).
    pub fn within_unordered(&self, x: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.is_empty() || r < 0.0 {
            return out;
        }
        let r2 = r * r;
        if Self::box_dist2(&self.root_lo, &self.root_hi, x) > r2 {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match &self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[*start..*end] {
                        if dist2(self.point(i), x) <= r2 {
                            out.push(i);
                        }
                    }
                }
                Node::Split {
                    left,
                    right,
                    lo,
                    hi,
                    start,
                    end,
                    ..
                } => {
                    if Self::box_far_dist2(lo, hi, x) <= r2 {
                        out.extend_from_slice(&self.order[*start..*end]);
                    } else if Self::box_dist2(lo, hi, x) <= r2 {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        out
    }

    /// The `k` nearest points as `(index, distance)`, nearest first; ties
    /// broken by index.
    pub fn nearest_k(&self, x: &[f64], k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let bound = if heap.len() == k {
                heap.peek().unwrap().0
            } else {
                f64::INFINITY
            };
            match &self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[*start..*end] {
                        let d = dist2(self.point(i), x);
                        let cand = Candidate(d, i);
                        if heap.len() < k {
                            heap.push(cand);
                        } else if cand < *heap.peek().unwrap() {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                    lo,
                    hi,
                    ..
                } => {
                    if Self::box_dist2(lo, hi, x) > bound {
                        continue;
                    }
                    // visit the near side first (pushed last)
                    if x[*axis] < *value {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        let mut v: Vec<(usize, f64)> = heap.into_iter().map(|c| (c.1, c.0.sqrt())).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        v
    }

    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.nearest_k(x, 1).into_iter().next()
    }
}

/// A cloud together with its spatial index.
#[derive(Debug, Clone)]
pub struct IndexedCloud {
    pub cloud: WeightedCloud,
    pub index: SpatialIndex,
}

impl IndexedCloud {
    pub fn new(cloud: WeightedCloud) -> Self {
        let index = SpatialIndex::for_cloud(&cloud);
        Self { cloud, index }
    }

    /// Closed-ball query with mass.
    pub fn ball(&self, x: &[f64], r: f64) -> BallHits {
        ball_query(&self.cloud, &self.index, x, r)
    }

    /// Mean distance from each sample to its nearest other sample.
    pub fn mean_spacing(&self) -> f64 {
        mean_spacing_of(&self.cloud, &self.index, 0..self.cloud.len())
    }

    pub fn dim_intrinsic(&self) -> usize {
        self.cloud.dim_intrinsic()
    }

    pub fn dim_ambient(&self) -> usize {
        self.cloud.dim_ambient()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.cloud.point(i)
    }
}

pub fn ball_query(cloud: &WeightedCloud, index: &SpatialIndex, x: &[f64], r: f64) -> BallHits {
    let indices = index.within_unordered(x, r);
    let mass = indices.iter().map(|&i| cloud.weight(i)).sum();
    BallHits { indices, mass }
}

/// Mean nearest-other-sample distance over the given subset.
pub fn mean_spacing_of(
    cloud: &WeightedCloud,
    index: &SpatialIndex,
    subset: impl IntoIterator<Item = usize>,
) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for i in subset {
        if let Some(&(_, d)) = index.nearest_k(cloud.point(i), 2).get(1) {
            total += d;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}
