use std::collections::HashMap;
use std::sync::Arc;

use approx::assert_relative_eq;
use lockern::deep_net::{propagation_gap, ConstituentSet, Dag, DagNode, Pooling, SourceInputs};
use lockern::estimator::{estimate_at, Dataset, EstimatorConfig, KernelEval};
use lockern::gaussian_net::{prefab_kernel_network, GaussianNetwork};
use lockern::hermite::{gauss_hermite_rule, hermite_row};
use lockern::kernels::{compile_kernel, mehler_forms, proj_reduced, proj_tensor, TabulatedKernel};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -2.5f64..2.5
}

fn rotate(theta: f64, p: &[f64]) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_entries_are_kronecker(j in 0usize..25, k in 0usize..25) {
        let rule = gauss_hermite_rule(40).unwrap();
        let g: f64 = rule
            .nodes()
            .iter()
            .zip(rule.lebesgue_weights())
            .map(|(&x, w)| {
                let row = hermite_row(25, x).unwrap();
                w * row.values()[j] * row.values()[k]
            })
            .sum();
        let target = if j == k { 1.0 } else { 0.0 };
        prop_assert!((g - target).abs() < 1e-12);
    }

    #[test]
    fn mehler_forms_agree(x in prop::collection::vec(coord(), 2), y in prop::collection::vec(coord(), 2), w in -0.9f64..0.9) {
        let [a, b, c] = mehler_forms(&x, &y, w).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-300);
        prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-300);
    }

    #[test]
    fn reduction_matches_tensor(x in prop::collection::vec(coord(), 3), y in prop::collection::vec(coord(), 3), m in 0usize..9) {
        let a = proj_reduced(m, 3, &x, &y).unwrap();
        let b = proj_tensor(m, &x, &y).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        let swapped = proj_reduced(m, 3, &y, &x).unwrap();
        prop_assert!((a - swapped).abs() < 1e-10);
    }

    #[test]
    fn estimator_is_linear_in_values(
        vals in prop::collection::vec(-2.0f64..2.0, 12),
        other in prop::collection::vec(-2.0f64..2.0, 12),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        x in coord(),
    ) {
        let pts: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.2 - 1.1, 0.5]).collect();
        let cfg = EstimatorConfig::new(5.0, 1.0, 1).unwrap();
        let f = Dataset::from_parts(pts.clone(), vals.clone(), 1).unwrap();
        let g = Dataset::from_parts(pts.clone(), other.clone(), 1).unwrap();
        let mix: Vec<f64> = vals.iter().zip(&other).map(|(u, v)| a * u + b * v).collect();
        let h = Dataset::from_parts(pts, mix, 1).unwrap();
        let q = [x, 0.5];
        let lhs = estimate_at(&h, &cfg, &q).unwrap();
        let rhs = a * estimate_at(&f, &cfg, &q).unwrap() + b * estimate_at(&g, &cfg, &q).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn estimator_is_rigid_motion_invariant(theta in 0.0f64..6.3, shift in prop::collection::vec(coord(), 3), t in 0.0f64..1.0) {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let s = i as f64 / 19.0;
                vec![s.cos(), s.sin(), 0.4 * s]
            })
            .collect();
        let vals: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| rotate(theta, p).iter().zip(&shift).map(|(a, b)| a + b).collect())
            .collect();
        let cfg = EstimatorConfig::new(4.0, 0.8, 1).unwrap();
        let ds = Dataset::from_parts(pts, vals.clone(), 1).unwrap();
        let ds2 = Dataset::from_parts(moved, vals, 1).unwrap();
        let x = vec![t.cos(), t.sin(), 0.4 * t];
        let x2: Vec<f64> = rotate(theta, &x).iter().zip(&shift).map(|(a, b)| a + b).collect();
        let a = estimate_at(&ds, &cfg, &x).unwrap();
        let b = estimate_at(&ds2, &cfg, &x2).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn tabulated_kernel_tracks_exact(r in 0.0f64..30.0) {
        let t = compile_kernel(12.0, 2).unwrap();
        let tab = TabulatedKernel::new(&t);
        prop_assert!((tab.eval(r) - t.eval(r)).abs() <= 1e-12 * t.eval(0.0));
    }

    #[test]
    fn propagation_bound_is_sound(eps in prop::collection::vec(0.0f64..0.05, 5), w in 0.1f64..1.5) {
        let dag = Dag::new(
            vec![
                DagNode::source("a", 1),
                DagNode::source("b", 1),
                DagNode::source("c", 1),
                DagNode::internal("u", &["a", "b"], Pooling::Identity, Some(w * std::f64::consts::SQRT_2)),
                DagNode::internal("v", &["u", "c"], Pooling::Clip { lo: -1.0, hi: 1.0 }, Some(1.0)),
            ],
            "v",
        )
        .unwrap();
        let mut f = ConstituentSet::new();
        f.insert("a".into(), Arc::new(|x: &[f64]| x[0].sin()));
        f.insert("b".into(), Arc::new(|x: &[f64]| 0.5 * x[0]));
        f.insert("c".into(), Arc::new(|x: &[f64]| x[0].cos()));
        f.insert("u".into(), Arc::new(move |x: &[f64]| w * (x[0] + x[1])));
        f.insert("v".into(), Arc::new(|x: &[f64]| (x[0] - x[1]) / std::f64::consts::SQRT_2));
        let ids = ["a", "b", "c", "u", "v"];
        let g: ConstituentSet = ids
            .iter()
            .zip(&eps)
            .map(|(id, e)| {
                let base = f[*id].clone();
                let e = *e;
                (id.to_string(), Arc::new(move |x: &[f64]| base(x) + e * (3.0 * x[0]).cos()) as _)
            })
            .collect();
        let probes: Vec<SourceInputs> = (0..15)
            .map(|i| {
                let s = i as f64 * 0.37 - 2.0;
                HashMap::from([
                    ("a".to_string(), vec![s]),
                    ("b".to_string(), vec![-s * 0.5]),
                    ("c".to_string(), vec![s * s * 0.3]),
                ])
            })
            .collect();
        let rep = propagation_gap(&dag, &f, &g, &probes).unwrap();
        prop_assert!(rep.measured <= rep.predicted * (1.0 + 1e-12) + 1e-15);
    }
}

#[test]
fn dataset_csv_round_trip_is_exact() {
    let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 3.0, -0.1 * i as f64, 1e-17 * i as f64]).collect();
    let vals: Vec<f64> = (0..7).map(|i| (i as f64).exp() / 7.0).collect();
    let ds = Dataset::from_parts(pts, vals, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    ds.save(&path).unwrap();
    let back = Dataset::load(&path, 2).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn network_file_round_trip_is_exact() {
    let net = prefab_kernel_network(4.0, 1, 2, 0.6).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    net.save(&path).unwrap();
    let back = GaussianNetwork::load(&path).unwrap();
    assert_eq!(back, net);
    for x in [[0.1, 0.2], [-1.0, 0.7]] {
        assert_eq!(back.eval(&x).to_bits(), net.eval(&x).to_bits());
    }
}

#[test]
fn tabulated_estimates_match_exact() {
    let pts: Vec<Vec<f64>> = (0..64).map(|i| vec![(i as f64 * 0.1).cos(), (i as f64 * 0.1).sin()]).collect();
    let vals: Vec<f64> = (0..64).map(|i| 1.0 + 0.01 * i as f64).collect();
    let ds = Dataset::from_parts(pts, vals, 1).unwrap();
    let exact = EstimatorConfig::new(16.0, 1.0, 1).unwrap();
    let tab = exact.clone().with_eval(KernelEval::Tabulated);
    for t in [0.3f64, 2.0, 5.1] {
        let x = [t.cos(), t.sin()];
        assert_relative_eq!(
            estimate_at(&ds, &exact, &x).unwrap(),
            estimate_at(&ds, &tab, &x).unwrap(),
            max_relative = 1e-10,
            epsilon = 1e-10
        );
    }
}
