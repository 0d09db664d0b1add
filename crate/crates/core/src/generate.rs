//! Synthetic corpora: flat disks, sphere caps, sinusoidal graphs, the
//! punctured disk and a flat disk carrying a two-plane tangent blend.
//!
//! Sampling is stratified jitter on a square grid in a parameter domain,
//! optionally subdivided inside a refinement ball. Cell masses are the
//! parameter cell volume times the Jacobian of the embedding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::TangentField;
use crate::error::{Error, Result};
use crate::geometry::{ProjMatrix, WeightedCloud};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    PlaneDisk,
    SphereCap,
    LipschitzGraph,
    PuncturedDisk,
    TwoPlaneBlend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `total_mass / N` for every sample.
    #[default]
    Uniform,
    /// Parameter cell volume times the embedding Jacobian.
    Cell,
}

/// Finer sampling inside a ball of the parameter domain: each coarse cell
/// whose center lies within `radius` of `center` is split into
/// `factor^n` sub-cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub center: Vec<f64>,
    pub radius: f64,
    pub factor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub d: usize,
    /// Target number of coarse samples.
    pub count: usize,
    /// Disk radius, or sphere radius for caps.
    pub extent: f64,
    /// Polar angle of a sphere cap.
    pub angle: f64,
    /// Graph amplitude.
    pub amplitude: f64,
    /// Graph frequency (periods per unit length).
    pub frequency: f64,
    /// Center of the removed cube.
    pub hole_center: Vec<f64>,
    pub hole_side: f64,
    /// Blend rate `c` in `alpha(0, r) = c r`.
    pub blend: f64,
    /// Jitter amplitude as a fraction of the cell size.
    pub jitter: f64,
    pub seed: u64,
    pub weights: WeightMode,
    /// Refinement balls; the first one containing a coarse cell center
    /// decides its subdivision.
    pub refine: Vec<Refinement>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::PlaneDisk,
            n: 2,
            d: 1,
            count: 2000,
            extent: 1.0,
            angle: std::f64::consts::FRAC_PI_3,
            amplitude: 0.02,
            frequency: 1.0,
            hole_center: vec![0.5, 0.0],
            hole_side: 0.1,
            blend: 2.0,
            jitter: 0.2,
            seed: 0,
            weights: WeightMode::Uniform,
            refine: Vec::new(),
        }
    }
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadSpec(m.to_string()));
        if self.n < 1 || self.d < 1 {
            return bad("need n >= 1 and d >= 1");
        }
        if self.count == 0 {
            return bad("count must be positive");
        }
        if !(self.extent > 0.0) || !self.extent.is_finite() {
            return bad("extent must be positive");
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return bad("jitter must lie in [0, 1)");
        }
        if !self.amplitude.is_finite() || !self.frequency.is_finite() || !self.blend.is_finite() {
            return bad("non-finite parameter");
        }
        for r in &self.refine {
            if r.center.len() != self.n || !(r.radius > 0.0) || r.factor == 0 {
                return bad("refinement needs an n-dimensional center, positive radius and factor");
            }
            if r.factor > 1 && self.weights == WeightMode::Uniform {
                return bad("refined sampling requires cell weights");
            }
        }
        match self.kind {
            GeneratorKind::SphereCap => {
                if !(self.angle > 0.0 && self.angle < std::f64::consts::PI) {
                    return bad("cap angle must lie in (0, pi)");
                }
            }
            GeneratorKind::PuncturedDisk => {
                if self.hole_center.len() != self.n || !(self.hole_side > 0.0) {
                    return bad("hole needs an n-dimensional center and positive side");
                }
                let far: f64 = self
                    .hole_center
                    .iter()
                    .map(|c| (c.abs() + self.hole_side / 2.0).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if far >= self.extent {
                    return bad("removed cube must lie strictly inside the disk");
                }
            }
            GeneratorKind::TwoPlaneBlend => {
                if self.blend < 0.0 {
                    return bad("blend needs a nonnegative rate");
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn domain_radius(&self) -> f64 {
        match self.kind {
            GeneratorKind::SphereCap => self.angle,
            _ => self.extent,
        }
    }

    fn in_domain(&self, u: &[f64]) -> bool {
        if linalg::norm(u) > self.domain_radius() {
            return false;
        }
        if self.kind == GeneratorKind::PuncturedDisk {
            let half = self.hole_side / 2.0;
            let inside = u
                .iter()
                .zip(&self.hole_center)
                .all(|(a, c)| (a - c).abs() <= half);
            return !inside;
        }
        true
    }

    /// Graph height and gradient in parameter coordinates.
    fn height(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let w = 2.0 * std::f64::consts::PI * self.frequency;
        let h = self.amplitude * u.iter().map(|x| (w * x).sin()).sum::<f64>();
        let g = u.iter().map(|x| self.amplitude * w * (w * x).cos()).collect();
        (h, g)
    }

    fn embed(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let n = self.n;
        let mut y = vec![0.0; n + self.d];
        match self.kind {
            GeneratorKind::SphereCap => {
                let t = linalg::norm(u);
                let r = self.extent;
                let sinc = if t == 0.0 { 1.0 } else { t.sin() / t };
                for a in 0..n {
                    y[a] = r * sinc * u[a];
                }
                y[n] = r * t.cos();
                (y, r.powi(n as i32) * sinc.powi(n as i32 - 1))
            }
            GeneratorKind::LipschitzGraph => {
                let (h, g) = self.height(u);
                y[..n].copy_from_slice(u);
                y[n] = h;
                (y, (1.0 + linalg::dot(&g, &g)).sqrt())
            }
            _ => {
                y[..n].copy_from_slice(u);
                (y, 1.0)
            }
        }
    }

    fn tangent(&self, u: &[f64], y: &[f64]) -> ProjMatrix {
        let n = self.n;
        let dim = n + self.d;
        match self.kind {
            GeneratorKind::SphereCap => {
                let r = self.extent;
                let mut frame_normal = vec![0.0; dim];
                frame_normal[..=n].iter_mut().zip(y).for_each(|(f, v)| *f = v / r);
                let mut m = nalgebra::DMatrix::zeros(dim, dim);
                for a in 0..n {
                    m[(a, a)] = 1.0;
                }
                m[(n, n)] = 1.0;
                for a in 0..=n {
                    for b in 0..=n {
                        m[(a, b)] -= frame_normal[a] * frame_normal[b];
                    }
                }
                ProjMatrix::from_raw(m)
            }
            GeneratorKind::LipschitzGraph => {
                let (_, g) = self.height(u);
                let spanning: Vec<Vec<f64>> = (0..n)
                    .map(|a| {
                        let mut v = vec![0.0; dim];
                        v[a] = 1.0;
                        v[n] = g[a];
                        v
                    })
                    .collect();
                let plane = crate::geometry::AffinePlane::from_spanning(vec![0.0; dim], &spanning)
                    .expect("graph tangent vectors are independent");
                plane.projection_matrix()
            }
            _ => coordinate_projection(dim, n),
        }
    }
}

/// Projection onto the first `n` coordinate axes of `R^dim`.
pub fn coordinate_projection(dim: usize, n: usize) -> ProjMatrix {
    let mut diag = vec![0.0; dim];
    diag[..n].iter_mut().for_each(|v| *v = 1.0);
    ProjMatrix::diagonal(&diag)
}

/// Projection onto the first `n - 1` axes together with axis `n`.
pub fn swapped_projection(dim: usize, n: usize) -> ProjMatrix {
    let mut diag = vec![0.0; dim];
    diag[..n - 1].iter_mut().for_each(|v| *v = 1.0);
    diag[n] = 1.0;
    ProjMatrix::diagonal(&diag)
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub cloud: WeightedCloud,
    pub tangents: Option<TangentField>,
    /// Parameter coordinates of every sample.
    pub params: Vec<Vec<f64>>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    let n = spec.n;
    let rad = spec.domain_radius();
    let h = (unit_ball_volume(n) * rad.powi(n as i32) / spec.count as f64).powf(1.0 / n as f64);
    let per_side = (rad / h).ceil() as i64;
    let width = (2 * per_side) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut params = Vec::new();
    let mut masses = Vec::new();
    let mut cell = vec![0.0; n];
    let mut u = vec![0.0; n];
    for code in 0..width.pow(n as u32) {
        let mut rem = code;
        for c in cell.iter_mut() {
            *c = ((rem % width) as i64 - per_side) as f64 * h;
            rem /= width;
        }
        let mid: Vec<f64> = cell.iter().map(|c| c + h / 2.0).collect();
        let factor = spec
            .refine
            .iter()
            .find(|r| linalg::dist(&mid, &r.center) <= r.radius)
            .map_or(1, |r| r.factor);
        let sub = h / factor as f64;
        for s in 0..factor.pow(n as u32) {
            let mut rem = s;
            for a in 0..n {
                let k = (rem % factor) as f64;
                rem /= factor;
                let jit: f64 = rng.gen_range(-0.5..0.5);
                u[a] = cell[a] + (k + 0.5 + spec.jitter * jit) * sub;
            }
            if spec.in_domain(&u) {
                params.push(u.clone());
                masses.push(sub.powi(n as i32));
            }
        }
    }
    if params.len() < n + 1 {
        return Err(Error::BadSpec(format!("only {} samples generated", params.len())));
    }

    let dim = n + spec.d;
    let mut coords = Vec::with_capacity(params.len() * dim);
    let mut weights = Vec::with_capacity(params.len());
    let mut tangents = Vec::with_capacity(params.len());
    for (u, m) in params.iter().zip(&masses) {
        let (y, jac) = spec.embed(u);
        tangents.push(Some(spec.tangent(u, &y)));
        coords.extend_from_slice(&y);
        weights.push(m * jac);
    }
    if spec.kind == GeneratorKind::TwoPlaneBlend {
        blend_tangents(spec, &params, &weights, &mut tangents);
    }
    let total: f64 = weights.iter().sum();
    let weights = match spec.weights {
        WeightMode::Uniform => None,
        WeightMode::Cell => Some(weights),
    };
    let cloud = WeightedCloud::new(n, dim, coords, weights, total)?;
    Ok(Generated {
        cloud,
        tangents: Some(TangentField::exact(tangents)),
        params,
    })
}

/// Share of swapped tangents inside `B_r(0)` that makes
/// `alpha(0, r)^2 = 2 q (1 - q) = (c r)^2`.
pub fn blend_target(c: f64, r: f64) -> f64 {
    let s = 2.0 * (c * r).powi(2);
    if s >= 1.0 {
        0.5
    } else {
        (1.0 - (1.0 - s).sqrt()) / 2.0
    }
}

fn blend_tangents(spec: &GeneratorSpec, params: &[Vec<f64>], weights: &[f64], out: &mut [Option<ProjMatrix>]) {
    let dim = spec.n + spec.d;
    let swapped = swapped_projection(dim, spec.n);
    let mut order: Vec<usize> = (0..params.len()).collect();
    let radius: Vec<f64> = params.iter().map(|u| linalg::norm(u)).collect();
    order.sort_by(|&a, &b| radius[a].total_cmp(&radius[b]).then(a.cmp(&b)));
    let (mut mass, mut mass_swapped) = (0.0, 0.0);
    for i in order {
        let target = blend_target(spec.blend, radius[i]);
        let w = weights[i];
        let keep = (mass_swapped / (mass + w) - target).abs();
        let swap = ((mass_swapped + w) / (mass + w) - target).abs();
        if swap < keep {
            out[i] = Some(swapped.clone());
            mass_swapped += w;
        }
        mass += w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_disk_is_flat_and_deterministic() {
        let spec = GeneratorSpec::new(GeneratorKind::PlaneDisk);
        let g = generate(&spec).unwrap();
        let c = &g.cloud;
        assert!((c.len() as f64 - 2000.0).abs() < 100.0, "{}", c.len());
        assert!(c.points().all(|p| p[2] == 0.0 && linalg::norm(p) <= 1.0));
        assert!((c.total_mass() - std::f64::consts::PI).abs() < 0.02);
        let again = generate(&spec).unwrap();
        assert_eq!(c.coords(), again.cloud.coords());
        let other = generate(&GeneratorSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(c.coords(), other.cloud.coords());
    }

    #[test]
    fn sphere_cap_on_sphere() {
        let spec = GeneratorSpec {
            weights: WeightMode::Cell,
            ..GeneratorSpec::new(GeneratorKind::SphereCap)
        };
        let g = generate(&spec).unwrap();
        for p in g.cloud.points() {
            assert!((linalg::norm(p) - 1.0).abs() < 1e-12);
            assert!(p[2] >= 0.5 - 1e-12);
        }
        let area = 2.0 * std::f64::consts::PI * (1.0 - spec.angle.cos());
        assert!((g.cloud.total_mass() - area).abs() < 0.01 * area);
        let t = g.tangents.unwrap();
        for (i, p) in g.cloud.points().enumerate().step_by(97) {
            let m = t.get(i).unwrap();
            assert!(m.is_projection_of_rank(2));
            assert!(linalg::norm(&m.apply(p)) < 1e-12);
        }
    }

    #[test]
    fn graph_tangents_contain_gradient_directions() {
        let spec = GeneratorSpec {
            amplitude: 0.05,
            ..GeneratorSpec::new(GeneratorKind::LipschitzGraph)
        };
        let g = generate(&spec).unwrap();
        let t = g.tangents.unwrap();
        let w = 2.0 * std::f64::consts::PI;
        for (i, u) in g.params.iter().enumerate().step_by(53) {
            let v = vec![1.0, 0.0, 0.05 * w * (w * u[0]).cos()];
            let pv = t.get(i).unwrap().apply(&v);
            assert!(linalg::dist(&pv, &v) < 1e-12);
            let p = g.cloud.point(i);
            assert!((p[2] - 0.05 * ((w * u[0]).sin() + (w * u[1]).sin())).abs() < 1e-15);
        }
    }

    #[test]
    fn punctured_disk_avoids_square() {
        let spec = GeneratorSpec {
            count: 20000,
            ..GeneratorSpec::new(GeneratorKind::PuncturedDisk)
        };
        let g = generate(&spec).unwrap();
        let mut near = 0;
        for p in g.cloud.points() {
            let inside = (p[0] - 0.5).abs() <= 0.05 && p[1].abs() <= 0.05;
            assert!(!inside);
            if (p[0] - 0.5).abs() <= 0.07 && p[1].abs() <= 0.07 {
                near += 1;
            }
        }
        assert!(near > 50);
        let bad = GeneratorSpec {
            hole_center: vec![0.97, 0.0],
            ..spec
        };
        assert!(matches!(generate(&bad), Err(Error::BadSpec(_))));
    }

    #[test]
    fn refinement_preserves_mass() {
        let spec = GeneratorSpec {
            weights: WeightMode::Cell,
            refine: vec![Refinement {
                center: vec![0.0, 0.0],
                radius: 0.3,
                factor: 3,
            }],
            ..GeneratorSpec::new(GeneratorKind::PlaneDisk)
        };
        let g = generate(&spec).unwrap();
        assert!((g.cloud.total_mass() - std::f64::consts::PI).abs() < 0.02);
        assert!(g.cloud.len() > 3000);
        let uniform = GeneratorSpec {
            weights: WeightMode::Uniform,
            ..spec
        };
        assert!(matches!(generate(&uniform), Err(Error::BadSpec(_))));
    }

    #[test]
    fn blend_target_inverts() {
        for r in [0.001, 0.01, 0.1, 0.3] {
            let q = blend_target(2.0, r);
            assert!((2.0 * q * (1.0 - q) - 4.0 * r * r).abs() < 1e-14);
        }
    }
}
