//! Cross-module properties and oracles checked through the public API.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{alpha, carleson_profile, TangentField};
use crate::ccbp::{build_ccbp, epsilon_prime, CcbpConfig, EpsilonTable};
use crate::generate::{generate, GeneratorKind, GeneratorSpec, Refinement, WeightMode};
use crate::geometry::{plane_distance_local, AffinePlane, ProjMatrix, WeightedCloud};
use crate::IndexedCloud;

fn rotation(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

fn random_frame(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Vec<Vec<f64>> {
    let q = rotation(rng, dim);
    (0..n).map(|j| q.column(j).iter().copied().collect()).collect()
}

fn conjugate(p: &ProjMatrix, q: &DMatrix<f64>) -> ProjMatrix {
    let m = q * p.matrix() * q.transpose();
    ProjMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

fn rotate(q: &DMatrix<f64>, v: &[f64], shift: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|i| (0..v.len()).map(|j| q[(i, j)] * v[j]).sum::<f64>() + shift[i])
        .collect()
}

/// Random plane through a point of `B_{r/2}(x)`, so it meets the ball.
fn plane_near(rng: &mut ChaCha8Rng, x: &[f64], r: f64, n: usize) -> AffinePlane {
    let base: Vec<f64> = x.iter().map(|c| c + rng.gen_range(-0.25..0.25) * r).collect();
    AffinePlane::new(base, random_frame(rng, x.len(), n)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plane_distance_is_symmetric_and_rigid(seed in any::<u64>(), n in 1usize..3, r in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = plane_near(&mut rng, &x, r, n);
        let f = plane_near(&mut rng, &x, r, n);
        let ef = plane_distance_local(&e, &f, &x, r).unwrap();
        let fe = plane_distance_local(&f, &e, &x, r).unwrap();
        prop_assert!((ef - fe).abs() <= 1e-12);
        prop_assert!(ef >= 0.0 && ef <= 2.0 + 1e-12);

        let q = rotation(&mut rng, 3);
        let shift: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let moved = plane_distance_local(
            &e.transformed(&q, &shift),
            &f.transformed(&q, &shift),
            &rotate(&q, &x, &shift),
            r,
        ).unwrap();
        prop_assert!((moved - ef).abs() <= 1e-9, "{} vs {}", moved, ef);
    }

    #[test]
    fn scaled_plane_distance_grows_with_radius(seed in any::<u64>(), r in 0.1f64..2.0, grow in 1.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = vec![0.0; 3];
        let e = plane_near(&mut rng, &x, r, 2);
        let f = plane_near(&mut rng, &x, r, 2);
        let small = r * plane_distance_local(&e, &f, &x, r).unwrap();
        let large = grow * r * plane_distance_local(&e, &f, &x, grow * r).unwrap();
        prop_assert!(small <= large + 1e-12, "{} > {}", small, large);
    }

    #[test]
    fn alpha_minimizes_and_is_rigid(seed in any::<u64>(), count in 5usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.1..1.0)).collect();
        let projs: Vec<ProjMatrix> = (0..count)
            .map(|_| ProjMatrix::from_orthonormal(3, &random_frame(&mut rng, 3, 2)))
            .collect();
        let cloud = WeightedCloud::from_points(2, &points, Some(weights.clone())).unwrap();
        let ic = IndexedCloud::new(cloud);
        let field = TangentField::exact(projs.iter().cloned().map(Some).collect());
        let x = vec![0.0; 3];
        let a = alpha(&ic, &field, &x, 1.0).unwrap();

        let mass: f64 = (0..count).map(|i| ic.cloud.weight(i)).sum();
        for _ in 0..8 {
            let rank = rng.gen_range(0..=3);
            let q = ProjMatrix::from_orthonormal(3, &random_frame(&mut rng, 3, rank));
            let diag = ProjMatrix::diagonal(&[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
            for c in [q, diag] {
                let dev: f64 = (0..count)
                    .map(|i| ic.cloud.weight(i) * projs[i].frobenius_sq_to(&c))
                    .sum::<f64>() / mass;
                prop_assert!(a * a <= dev + 1e-12);
            }
        }

        let q = rotation(&mut rng, 3);
        let shift: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let moved_points: Vec<Vec<f64>> = points.iter().map(|p| rotate(&q, p, &shift)).collect();
        let moved = IndexedCloud::new(WeightedCloud::from_points(2, &moved_points, Some(weights)).unwrap());
        let moved_field = TangentField::exact(projs.iter().map(|p| Some(conjugate(p, &q))).collect());
        let b = alpha(&moved, &moved_field, &rotate(&q, &x, &shift), 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
    }
}

#[test]
fn epsilon_table_matches_brute_force() {
    let spec = GeneratorSpec {
        count: 20000,
        amplitude: 0.05,
        weights: WeightMode::Cell,
        ..GeneratorSpec::new(GeneratorKind::LipschitzGraph)
    };
    let g = generate(&spec).unwrap();
    let field = g.tangents.clone().unwrap();
    let ic = IndexedCloud::new(g.cloud);
    let config = CcbpConfig {
        depth: 2,
        anchor: Some(vec![0.0; 3]),
        region_scale: 0.5,
        region_factor: 1.0,
        ..CcbpConfig::default()
    };
    let c = build_ccbp(&ic, &field, &config).unwrap();
    assert_eq!(c.depth(), 2);
    let table = EpsilonTable::build(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut nonzero = 0;
    for _ in 0..300 {
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.6..0.6)).collect();
        for k in 0..c.depth() {
            let brute = epsilon_prime(&c, k, &y);
            assert_eq!(table.epsilon_prime(&c, k, &y), brute, "k={k} y={y:?}");
            nonzero += usize::from(brute > 0.0);
        }
    }
    assert!(nonzero > 100, "only {nonzero} nonzero lookups");
}

#[test]
fn blend_profile_matches_quadratic_alpha() {
    let spec = GeneratorSpec {
        count: 20000,
        weights: WeightMode::Cell,
        refine: vec![Refinement {
            center: vec![0.0, 0.0],
            radius: 0.05,
            factor: 8,
        }],
        ..GeneratorSpec::new(GeneratorKind::TwoPlaneBlend)
    };
    let g = generate(&spec).unwrap();
    let field = g.tangents.clone().unwrap();
    let ic = IndexedCloud::new(g.cloud);
    let profile = carleson_profile(&ic, &field, &[0.0; 3], 6, 0.1).unwrap();
    assert!(profile.scales.len() >= 2);
    // alpha(0, r)^2 = (2 r)^2 at every scale, so the sum is 0.04 * (1 + 1e-2 + ...)
    let kept = profile.scales.len() as i32;
    let oracle = 0.04 * (1.0 - 0.01f64.powi(kept)) / 0.99;
    let rel = (profile.carleson_sum - oracle).abs() / oracle;
    assert!(rel <= 0.05, "sum {} vs {oracle}", profile.carleson_sum);
    // finer balls hold too few samples for the swapped share to be resolved
    let want = 0.2;
    assert!((profile.alphas[0] - want).abs() <= 0.05 * want, "alpha(0.1) = {}", profile.alphas[0]);
}

#[test]
fn generators_are_deterministic_and_valid() {
    let kinds = [
        GeneratorKind::PlaneDisk,
        GeneratorKind::SphereCap,
        GeneratorKind::LipschitzGraph,
        GeneratorKind::PuncturedDisk,
        GeneratorKind::TwoPlaneBlend,
    ];
    for kind in kinds {
        for weights in [WeightMode::Uniform, WeightMode::Cell] {
            let spec = GeneratorSpec {
                count: 800,
                weights,
                seed: 11,
                ..GeneratorSpec::new(kind)
            };
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a.cloud.coords(), b.cloud.coords(), "{kind:?}");
            assert_eq!(a.cloud.weights(), b.cloud.weights(), "{kind:?}");
            a.cloud.check().unwrap();
            assert!((a.cloud.weights().iter().sum::<f64>() - a.cloud.total_mass()).abs() < 1e-9);

            let other = generate(&GeneratorSpec { seed: 12, ..spec }).unwrap();
            assert_ne!(a.cloud.coords(), other.cloud.coords(), "{kind:?} ignores the seed");
        }
    }
}
