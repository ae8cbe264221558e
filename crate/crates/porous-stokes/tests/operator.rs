use std::f64::consts::PI;
use std::sync::OnceLock;

use porous_stokes::geometry::{discretize, BoundaryDiscretization};
use porous_stokes::kernel::stokeslet;
use porous_stokes::operator::{
    assemble_block, assemble_dense, DenseOperator, FmmOperator, FmmOptions, LinearOperator, OperatorConfig,
    OperatorRegistry, PointFmm,
};
use porous_stokes::presets::desk_geometry;
use porous_stokes::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

struct Fixture {
    disc: BoundaryDiscretization,
    dense: DenseOperator,
    fmm10: FmmOperator,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let disc = discretize(&desk_geometry(22).unwrap(), 64, 1024).unwrap();
        let dense = assemble_dense(&disc).unwrap();
        let fmm10 = FmmOperator::new(&disc, &FmmOptions::default()).unwrap();
        Fixture { disc, dense, fmm10 }
    })
}

#[test]
fn far_pair_block_is_scaled_kernel() {
    let disc = discretize(&desk_geometry(4).unwrap(), 64, 256).unwrap();
    let (i, j) = (3, 70);
    assert_ne!(disc.body_of[i], disc.body_of[j]);
    let b = assemble_block(&disc, &[i], &[j]);
    let g = stokeslet(disc.points[i], disc.points[j]);
    let s = disc.ds[j] / (4.0 * PI);
    for k in 0..4 {
        assert!((b[[k / 2, k % 2]] - s * g[k]).abs() < 1e-15);
    }
    let d = assemble_block(&disc, &[i], &[i]);
    assert!(d.iter().all(|&v| v == 0.0));
}

#[test]
fn two_point_product_by_hand() {
    let disc = BoundaryDiscretization::circle([0.0, 0.0], 1.0, 16).unwrap();
    let (x, y) = (disc.points[0], disc.points[8]);
    assert!((x[0] - (-y[0])).abs() < 1e-15);
    let b = assemble_block(&disc, &[0], &[8]);
    let v = [0.3, -0.7];
    // rho = 2 along the x axis: G = -log 2 I + e1 e1^T
    let w = disc.ds[8] / (4.0 * PI);
    let rho = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
    let expect = [w * ((-rho.ln() + 1.0) * v[0]), w * (-rho.ln() * v[1])];
    let got = [b[[0, 0]] * v[0] + b[[0, 1]] * v[1], b[[1, 0]] * v[0] + b[[1, 1]] * v[1]];
    assert!((got[0] - expect[0]).abs() < 1e-12 && (got[1] - expect[1]).abs() < 1e-12, "{got:?} {expect:?}");
}

#[test]
fn circle_trace_of_constant_density() {
    let disc = BoundaryDiscretization::circle([0.0, 0.0], 1.0, 256).unwrap();
    let a = assemble_dense(&disc).unwrap();
    for s in [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]] {
        let sigma: Vec<f64> = (0..disc.len()).flat_map(|_| s).collect();
        let u = a.apply(&sigma).unwrap();
        let err = u.iter().enumerate().map(|(k, v)| (v - 0.25 * s[k % 2]).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
    }
}

#[test]
fn dense_matrix_is_symmetric_up_to_weights() {
    let disc = discretize(&desk_geometry(4).unwrap(), 64, 256).unwrap();
    let a = assemble_dense(&disc).unwrap().matrix;
    for (i, j) in [(0, 100), (5, 300), (70, 140)] {
        for (p, q) in [(0, 0), (0, 1), (1, 1)] {
            let lhs = a[[2 * i + p, 2 * j + q]] / disc.ds[j];
            let rhs = a[[2 * j + q, 2 * i + p]] / disc.ds[i];
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }
}

#[test]
fn fmm_matches_dense_on_random_vectors() {
    let fx = fixture();
    let fmm15 = FmmOperator::new(&fx.disc, &FmmOptions { n: 15, ..FmmOptions::default() }).unwrap();
    for seed in 0..3 {
        let v = random_vec(fx.disc.unknowns(), seed);
        let d = fx.dense.apply(&v).unwrap();
        let e10 = rel(&fx.fmm10.apply(&v).unwrap(), &d);
        let e15 = rel(&fmm15.apply(&v).unwrap(), &d);
        assert!(e10 <= 1e-8, "n=10: {e10}");
        assert!(e15 <= 1e-10, "n=15: {e15}");
    }
}

#[test]
fn fmm_error_decreases_with_order() {
    let fx = fixture();
    let v = random_vec(fx.disc.unknowns(), 11);
    let d = fx.dense.apply(&v).unwrap();
    let errs: Vec<f64> = [4, 6, 8]
        .iter()
        .map(|&n| {
            let op = FmmOperator::new(&fx.disc, &FmmOptions { n, levels: Some(fx.fmm10.depth()), ..FmmOptions::default() });
            rel(&op.unwrap().apply(&v).unwrap(), &d)
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn fmm_zero_and_dimension_checks() {
    let fx = fixture();
    let n = fx.disc.unknowns();
    assert!(fx.fmm10.apply(&vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
    assert!(matches!(
        fx.fmm10.apply(&vec![0.0; n - 1]),
        Err(Error::DimensionMismatch { expected, got }) if expected == n && got == n - 1
    ));
    assert!(fx.dense.apply(&[1.0]).is_err());
}

#[test]
fn fmm_with_and_without_near_cache_agree() {
    let fx = fixture();
    let opts = FmmOptions { near_cache_bytes: 0, ..FmmOptions::default() };
    let uncached = FmmOperator::new(&fx.disc, &opts).unwrap();
    assert!(fx.fmm10.fmm.near_cached() && !uncached.fmm.near_cached());
    let v = random_vec(fx.disc.unknowns(), 3);
    let e = rel(&uncached.apply(&v).unwrap(), &fx.fmm10.apply(&v).unwrap());
    assert!(e < 1e-13, "{e}");
}

#[test]
fn point_fmm_skips_zero_weight_sources() {
    let disc = BoundaryDiscretization::circle([0.0, 0.0], 1.0, 512).unwrap();
    let mut pts = disc.points.clone();
    let mut w = disc.ds.clone();
    let targets = [[0.2, 0.1], [-0.5, 0.3], [0.0, -0.7]];
    pts.extend(targets);
    w.extend([0.0; 3]);
    let fmm = PointFmm::new(pts, w, &FmmOptions { n: 15, levels: Some(3), ..FmmOptions::default() }).unwrap();
    let mut sigma = vec![0.0; 2 * fmm.len()];
    for k in 0..disc.len() {
        sigma[2 * k] = 1.0;
    }
    let u = fmm.evaluate(&sigma);
    for t in 0..3 {
        let k = disc.len() + t;
        // interior single layer of a constant density on the unit circle
        assert!((u[2 * k] - 0.25).abs() < 1e-10 && u[2 * k + 1].abs() < 1e-10, "{} {}", u[2 * k], u[2 * k + 1]);
    }
}

#[test]
fn registry_selects_by_name() {
    let reg = OperatorRegistry::default();
    let names: Vec<&str> = reg.names().collect();
    assert_eq!(names, ["dense", "fmm"]);
    let disc = discretize(&desk_geometry(0).unwrap(), 16, 256).unwrap();
    let op = reg.build(&disc, &OperatorConfig { kind: "dense".into(), ..OperatorConfig::default() }).unwrap();
    assert_eq!(op.dim(), 512);
    let bad = reg.build(&disc, &OperatorConfig { kind: "ewald".into(), ..OperatorConfig::default() });
    assert!(matches!(bad, Err(Error::UnknownStrategy { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn fmm_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0u64..1000) {
        let fx = fixture();
        let n = fx.disc.unknowns();
        let (u, v) = (random_vec(n, s), random_vec(n, s + 1));
        let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = fx.fmm10.apply(&comb).unwrap();
        let (au, av) = (fx.fmm10.apply(&u).unwrap(), fx.fmm10.apply(&v).unwrap());
        let rhs: Vec<f64> = au.iter().zip(&av).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(rel(&lhs, &rhs) < 1e-12);
    }
}
