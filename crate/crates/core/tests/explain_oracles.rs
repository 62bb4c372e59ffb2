mod common;

use gbt_trust_core::data::{train_test_split, Table};
use gbt_trust_core::explain::{
    ice, importance_gain, importance_permutation, lime_explain, pdp, quantile_grid,
    sample_background, shap_exact, shap_sampled, threshold_scan, LimeConfig,
};
use gbt_trust_core::gbt::{rmse, train, Ensemble, Node, RegressionTree, TrainConfig};
use gbt_trust_core::Predictor;

fn fitted(t: &Table, n_trees: usize, seed: u64) -> Ensemble {
    let cfg = TrainConfig {
        n_trees,
        shrinkage: 0.1,
        max_depth: 4,
        min_node_rows: 2,
        seed,
        ..TrainConfig::default()
    };
    train(t, &cfg, None).unwrap().0
}

fn double_loop(model: &impl Predictor, t: &Table, j: usize, grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for &v in grid {
        let mut total = 0.0;
        for i in 0..t.n_rows() {
            let mut x = t.row(i).to_vec();
            x[j] = v;
            total += model.predict(&x);
        }
        out.push(total / t.n_rows() as f64);
    }
    out
}

#[test]
fn pdp_matches_double_loop_and_ice_mean() {
    let mut t = common::panel(2, 100, 3);
    t = t.select_rows(&(0..200).collect::<Vec<_>>()).unwrap();
    let e = fitted(&t, 60, 1);
    for j in 0..t.n_features() {
        let c = pdp(&e, &t, j, 15).unwrap();
        let grid = quantile_grid(&t, j, 15).unwrap();
        assert_eq!(c.grid, grid);
        assert!(c.grid.windows(2).all(|w| w[0] < w[1]));
        let oracle = double_loop(&e, &t, j, &grid);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&c.values), bits(&oracle));
        let b = ice(&e, &t, j, 15, false).unwrap();
        assert_eq!(bits(&b.column_means()), bits(&c.values));
        let centered = ice(&e, &t, j, 15, true).unwrap();
        assert!(centered.curves.iter().all(|c| c[0] == 0.0));
    }
    let one = t.select_rows(&[0]).unwrap();
    assert!(ice(&e, &one, 0, 5, false).is_err());
}

#[test]
fn single_row_ice_is_the_pdp() {
    let t = common::panel(1, 30, 8);
    let e = fitted(&t, 20, 2);
    let b = ice(&e, &t, 0, 6, false).unwrap();
    let row = t.select_rows(&[4]).unwrap();
    let single: Vec<f64> = b.grid.iter().map(|&v| {
        let mut x = row.row(0).to_vec();
        x[0] = v;
        e.predict(&x)
    }).collect();
    assert_eq!(b.curves[4], single);
}

/// base 10, γ 0.5; a < 2.5 → (b < 0.5 → 1, else 2), else 4.
fn hand_model() -> Ensemble {
    let nodes = vec![
        Node::Split { feature: 0, threshold: 2.5, default_left: true, left: 1, right: 4, gain: 1.0, n_rows: 5 },
        Node::Split { feature: 1, threshold: 0.5, default_left: true, left: 2, right: 3, gain: 1.0, n_rows: 2 },
        Node::Leaf { value: 1.0, n_rows: 1 },
        Node::Leaf { value: 2.0, n_rows: 1 },
        Node::Leaf { value: 4.0, n_rows: 3 },
    ];
    let tree = RegressionTree::from_nodes(nodes, 0, 2).unwrap();
    Ensemble::from_parts(10.0, 0.5, vec![tree], vec!["a".into(), "b".into()], TrainConfig::default())
        .unwrap()
}

#[test]
fn five_row_hand_enumeration() {
    let rows = vec![
        vec![1.0, 0.0],
        vec![2.0, 1.0],
        vec![3.0, 0.0],
        vec![4.0, 1.0],
        vec![5.0, 1.0],
    ];
    let t = Table::from_rows(vec!["a".into(), "b".into()], &rows, vec![0.0; 5], "y").unwrap();
    let c = pdp(&hand_model(), &t, 0, 3).unwrap();
    assert_eq!(c.grid, vec![1.0, 3.0, 5.0]);
    // a = 1: every row goes left, then b picks 10.5 or 11.
    //   10.5 + 11 + 10.5 + 11 + 11 = 54 over 5 rows.
    // a = 3 and a = 5: every row lands on leaf 4, 12 each.
    assert_eq!(c.values[0].to_bits(), (54.0f64 / 5.0).to_bits());
    assert_eq!(c.values[1], 12.0);
    assert_eq!(c.values[2], 12.0);
}

#[test]
fn additive_truth_is_recovered_by_pdp() {
    let mut rng = common::TestRng(31);
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)])
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + r[1]).collect();
    let t = Table::from_rows(vec!["x1".into(), "x2".into()], &rows, y, "y").unwrap();
    let cfg = TrainConfig {
        n_trees: 600,
        shrinkage: 0.3,
        max_depth: 1,
        min_node_rows: 1,
        bag_fraction: 1.0,
        column_sample: 1.0,
        seed: 0,
    };
    let (e, _) = train(&t, &cfg, None).unwrap();
    let fit = rmse(&e.predict_table(&t).unwrap(), t.target()).unwrap();
    assert!(fit < 0.05, "fit rmse {fit}");
    let mean_x2 = rows.iter().map(|r| r[1]).sum::<f64>() / rows.len() as f64;
    let c = pdp(&e, &t, 0, 10).unwrap();
    for (v, p) in c.grid.iter().zip(&c.values) {
        assert!((p - (3.0 * v + mean_x2)).abs() < 4.0 * fit + 0.05, "{v}: {p}");
    }
}

#[test]
fn shapley_efficiency_and_dummy() {
    let mut rng = common::TestRng(77);
    let mut rows: Vec<Vec<f64>> = (0..150)
        .map(|_| (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect())
        .collect();
    for r in &mut rows {
        r[5] = 1.0;
    }
    let y: Vec<f64> = rows.iter().map(|r| r[0] * r[1] + r[2].exp() - r[3]).collect();
    let names = (0..6).map(|j| format!("x{j}")).collect();
    let t = Table::from_rows(names, &rows, y, "y").unwrap();
    let e = fitted(&t, 80, 4);
    assert!(e
        .trees()
        .iter()
        .flat_map(|tr| tr.nodes())
        .all(|n| !matches!(n, Node::Split { feature: 5, .. })));
    let bg = sample_background(&t, 25, 1).unwrap();
    for _ in 0..20 {
        let mut x: Vec<f64> = (0..6).map(|_| rng.uniform(-2.5, 2.5)).collect();
        x[5] = rng.uniform(-9.0, 9.0);
        let s = shap_exact(&e, &x, &bg).unwrap();
        assert_eq!(s.phi[5], 0.0);
        let scale = s.prediction.abs().max(s.baseline.abs()).max(1.0);
        assert!(s.efficiency_gap().abs() <= 1e-8 * scale);
    }
}

#[test]
fn shapley_symmetry() {
    struct Sum;
    impl Predictor for Sum {
        fn n_features(&self) -> usize {
            3
        }
        fn predict(&self, x: &[f64]) -> f64 {
            x[0] + x[1] + 0.5 * x[2]
        }
    }
    let rows = vec![vec![0.0, 2.0, 1.0], vec![2.0, 0.0, 3.0]];
    let bg = Table::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows, vec![0.0; 2], "y")
        .unwrap();
    let s = shap_exact(&Sum, &[3.0, 3.0, 0.0], &bg).unwrap();
    assert_eq!(s.phi[0], s.phi[1]);
    assert_eq!(s.phi[0], 2.0);
}

#[test]
fn sampled_shapley_tracks_exact() {
    let t = common::panel(2, 150, 21);
    let e = fitted(&t, 80, 0);
    let bg = sample_background(&t, 40, 2).unwrap();
    for row in [3, 77, 210] {
        let x = t.row(row).to_vec();
        let exact = shap_exact(&e, &x, &bg).unwrap();
        let sampled = shap_sampled(&e, &x, &bg, 5000, 13).unwrap();
        let max = exact.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in exact.phi.iter().zip(&sampled.phi) {
            assert!((a - b).abs() <= 0.05 * max, "row {row}: {a} vs {b}");
        }
        assert!(sampled.efficiency_gap().abs() <= 1e-9 * sampled.prediction.abs().max(1.0));
    }
    struct Flat;
    impl Predictor for Flat {
        fn n_features(&self) -> usize {
            6
        }
        fn predict(&self, _: &[f64]) -> f64 {
            42.0
        }
    }
    let s = shap_sampled(&Flat, t.row(0), &bg, 50, 1).unwrap();
    assert!(s.phi.iter().all(|&p| p == 0.0));
}

#[test]
fn lime_recovers_linear_double() {
    struct Linear;
    impl Predictor for Linear {
        fn n_features(&self) -> usize {
            6
        }
        fn predict(&self, x: &[f64]) -> f64 {
            5.0 + 40.0 * x[0] - 12.0 * x[1] + 3.0 * x[2] + 0.5 * x[3] - 7.0 * x[5]
        }
    }
    let t = common::panel(2, 100, 5);
    let cfg = LimeConfig {
        n_samples: 1000,
        top_features: 6,
        kernel_width: None,
        seed: 8,
    };
    let x = t.row(11).to_vec();
    let a = lime_explain(&Linear, &x, &t, &cfg).unwrap();
    let truth = [40.0, -12.0, 3.0, 0.5, 0.0, -7.0];
    for w in &a.weights {
        let want = truth[w.feature_index];
        assert!((w.weight - want).abs() <= 0.01 * want.abs().max(1e-6), "{}: {}", w.feature, w.weight);
    }
    assert_eq!(a.weights[0].feature, "leverage");
    assert!((a.intercept - 5.0).abs() < 1e-6);
    assert_eq!(a, lime_explain(&Linear, &x, &t, &cfg).unwrap());
    let top2 = lime_explain(&Linear, &x, &t, &LimeConfig { top_features: 2, ..cfg }).unwrap();
    assert_eq!(top2.weights.len(), 2);
}

#[test]
fn inert_feature_carries_no_importance() {
    let t = common::panel(5, 200, 1);
    let (fit, hold) = train_test_split(&t, 0.7, 1).unwrap();
    let e = fitted(&fit, 200, 5);
    let gain = importance_gain(&e);
    let noise = gain.entries.iter().find(|x| x.feature == "noise").unwrap();
    assert!(noise.relative_percent < 1.0, "noise share {}", noise.relative_percent);
    let total: f64 = gain.entries.iter().map(|x| x.relative_percent).sum();
    assert!((total - 100.0).abs() < 1e-6);

    let perm = importance_permutation(&e, &hold, 5, 3).unwrap();
    let noise = perm.entries.iter().find(|x| x.feature == "noise").unwrap();
    assert!(noise.score.abs() <= 2.0 * noise.std.unwrap(), "{noise:?}");
    let rec = perm.entries.iter().find(|x| x.feature == "recovery").unwrap();
    assert!(rec.score > 0.0);
    assert!(perm.rank_of("recovery").unwrap() <= 3);
}

#[test]
fn top_gain_ranking_is_stable_across_seeds() {
    let mut reference: Option<Vec<String>> = None;
    for seed in 0..10u64 {
        let t = common::panel(5, 200, 100 + seed);
        let e = fitted(&t, 150, seed);
        let r = importance_gain(&e);
        let major: Vec<String> = r.top(5).into_iter().map(|x| x.feature.clone()).collect();
        match &reference {
            None => reference = Some(major),
            Some(want) => assert_eq!(&major, want, "seed {seed}"),
        }
    }
}

#[test]
fn recovery_pdp_falls() {
    let t = common::panel(5, 200, 2);
    let e = fitted(&t, 200, 0);
    let rec = t.feature_index("recovery").unwrap();
    let c = pdp(&e, &t, rec, 10).unwrap();
    assert!(c.values.first().unwrap() > c.values.last().unwrap());
    let findings = threshold_scan(&c, 1.0);
    assert!(findings.iter().all(|f| c.grid.contains(&f.lower) && c.grid.contains(&f.upper)));
}
