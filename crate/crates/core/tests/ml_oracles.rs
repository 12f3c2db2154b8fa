mod common;

use std::time::Instant;

use common::oracles::*;
use level_screen::ml::*;
use ndarray::{Array1, Array2};
use rand::Rng;

#[test]
fn knn_matches_full_scan() {
    let start = Instant::now();
    let mut r = rng(7);
    for corpus in 0..50 {
        let n = r.random_range(2..=200);
        let p = r.random_range(1..=61);
        let (x, y) = random_corpus(&mut r, n, p, 3);
        let k = r.random_range(1..=n.min(15));
        let m = KnnModel::fit(x.view(), &y, k).unwrap();
        for q in 0..20 {
            let query: Vec<f64> = if q % 2 == 0 {
                x.row(r.random_range(0..n)).to_vec()
            } else {
                (0..p).map(|_| r.random_range(0..3) as f64 * 0.5).collect()
            };
            let qv = Array1::from(query.clone());
            let (pos, pred) = knn_brute(&x, &y, &query, k);
            assert_eq!(m.predict(qv.view()), pred, "corpus {corpus} query {q}");
            assert_eq!(m.score(qv.view()), pos as f64 / k as f64);
        }
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn tree_root_matches_enumeration() {
    let mut r = rng(11);
    for corpus in 0..50 {
        let n = r.random_range(1..=50);
        let p = r.random_range(1..=10);
        let (x, y) = random_corpus(&mut r, n, p, 6);
        let min_leaf = r.random_range(1..=3);
        let params = TreeParams {
            max_depth: Some(1),
            min_samples_leaf: min_leaf,
            max_features: None,
        };
        let t = TreeModel::fit(x.view(), &y, params).unwrap();
        let pure = y.iter().all(|&b| b) || y.iter().all(|&b| !b);
        let expected = if pure || n < 2 * min_leaf { None } else { best_root_split(&x, &y, min_leaf) };
        match (t.root_split(), expected) {
            (None, None) => {}
            (Some((c, thr, g)), Some((ec, ethr, eg))) => {
                assert_eq!((c, thr), (ec, ethr), "corpus {corpus}");
                assert!((g - eg).abs() <= 1e-9, "corpus {corpus}: {g} vs {eg}");
            }
            (got, want) => panic!("corpus {corpus}: {got:?} vs {want:?}"),
        }
    }
}

#[test]
fn tree_splits_partition_and_counts_sum() {
    let mut r = rng(12);
    for _ in 0..20 {
        let (x, y) = random_corpus(&mut r, 40, 4, 5);
        let t = TreeModel::fit(x.view(), &y, TreeParams::default()).unwrap();
        for node in &t.nodes {
            if let Node::Split { left, right, counts, .. } = node {
                let total = |id: usize| match &t.nodes[id] {
                    Node::Leaf { counts } | Node::Split { counts, .. } => counts[0] + counts[1],
                };
                assert!(total(*left) > 0 && total(*right) > 0);
                assert_eq!(total(*left) + total(*right), counts[0] + counts[1]);
            }
        }
        // unlimited depth separates distinct rows
        for i in 0..40 {
            let s = t.score(x.row(i));
            assert_eq!(t.predict(x.row(i)), s >= 0.5);
        }
    }
}

fn standardized(r: &mut rand_chacha::ChaCha8Rng, n: usize, p: usize) -> (Array2<f64>, Vec<f64>) {
    let x = Array2::from_shape_fn((n, p), |_| r.random_range(-2.0..2.0));
    let s = ScalerState::fit(x.view()).unwrap();
    let z = s.transform(x.view()).unwrap();
    let y = (0..n)
        .map(|i| 0.8 * z[[i, 0]] - 0.5 * z[[i, p - 1]] + r.random_range(-0.5..0.5))
        .collect();
    (z, y)
}

#[test]
fn lasso_kkt_and_lambda_max() {
    let mut r = rng(21);
    for _ in 0..30 {
        let n = r.random_range(10..80);
        let p = r.random_range(2..20);
        let (x, y) = standardized(&mut r, n, p);
        let yv = Array1::from(y.clone());
        let lmax = lambda_max(x.view(), yv.view()).unwrap();
        for frac in [0.001, 0.05, 0.3, 0.7, 0.99] {
            let m = LassoModel::fit(x.view(), yv.view(), &LassoParams::new(frac * lmax)).unwrap();
            let v = lasso_kkt(&x, &y, &m.coefficients, m.intercept, frac * lmax);
            assert!(v <= 1e-5, "kkt {v}");
        }
        for frac in [1.0, 1.5] {
            let m = LassoModel::fit(x.view(), yv.view(), &LassoParams::new(frac * lmax)).unwrap();
            assert!(m.coefficients.iter().all(|&b| b == 0.0));
            assert!(m.select(0.0).is_empty());
        }
    }
}

#[test]
fn lasso_single_feature_is_ols() {
    let mut r = rng(22);
    for _ in 0..10 {
        let (x, y) = standardized(&mut r, 30, 1);
        let (slope, icpt) = ols_single(&x.column(0).to_vec(), &y);
        let m = LassoModel::fit(x.view(), Array1::from(y).view(), &LassoParams::new(0.0)).unwrap();
        assert!((m.coefficients[0] - slope).abs() < 1e-8);
        assert!((m.intercept - icpt).abs() < 1e-8);
    }
}

#[test]
fn lasso_zero_columns_give_mean() {
    let x = Array2::<f64>::zeros((5, 3));
    let y = Array1::from(vec![1.0, 0.0, 1.0, 1.0, 0.0]);
    let m = LassoModel::fit(x.view(), y.view(), &LassoParams::new(0.1)).unwrap();
    assert!(m.coefficients.iter().all(|&b| b == 0.0));
    assert!((m.intercept - 0.6).abs() < 1e-15);
    assert!(m.select(f64::INFINITY).is_empty());
}

#[test]
fn lasso_selection_shrinks_along_grid() {
    let mut r = rng(23);
    for _ in 0..5 {
        let (x, y) = standardized(&mut r, 60, 12);
        let yv = Array1::from(y);
        let lmax = lambda_max(x.view(), yv.view()).unwrap();
        let mut prev = usize::MAX;
        for step in 0..=10 {
            let lambda = lmax * step as f64 / 10.0;
            let m = LassoModel::fit(x.view(), yv.view(), &LassoParams::new(lambda)).unwrap();
            assert!(m.selected.len() <= prev);
            prev = m.selected.len();
        }
    }
}

#[test]
fn svm_dual_constraints_hold() {
    let mut r = rng(31);
    for _ in 0..20 {
        let n = r.random_range(4..60);
        let (x, mut y) = random_corpus(&mut r, n, 3, 8);
        y[0] = true;
        y[1] = false;
        let c = [0.1, 1.0, 10.0][r.random_range(0..3)];
        let kernel = if r.random_bool(0.5) { Kernel::Linear } else { Kernel::Rbf { gamma: 0.5 } };
        let m = SvmModel::fit(x.view(), &y, &SvmParams::new(c, kernel)).unwrap();
        assert!(m.alphas.iter().all(|&a| a >= 0.0 && a <= c));
        assert!(m.dual_balance().abs() < 1e-6);
        let again = SvmModel::fit(x.view(), &y, &SvmParams::new(c, kernel)).unwrap();
        assert_eq!(m, again);
    }
}

#[test]
fn svm_separates_blobs() {
    let mut r = rng(32);
    let x = Array2::from_shape_fn((60, 2), |(i, _)| {
        let centre = if i < 30 { -2.0 } else { 2.0 };
        centre + r.random_range(-0.5..0.5)
    });
    let y: Vec<bool> = (0..60).map(|i| i >= 30).collect();
    let m = SvmModel::fit(x.view(), &y, &SvmParams::new(10.0, Kernel::Rbf { gamma: 1.0 })).unwrap();
    assert_eq!(m.predict_rows(x.view()), y);
}

#[test]
fn forest_is_bitwise_deterministic() {
    let mut r = rng(41);
    let (x, y) = random_corpus(&mut r, 80, 6, 5);
    let params = ForestParams {
        n_trees: 25,
        max_features: 2,
        max_depth: None,
        min_samples_leaf: 1,
        bootstrap: true,
        seed: 5,
    };
    let a = ForestModel::fit(x.view(), &y, params).unwrap();
    let b = ForestModel::fit(x.view(), &y, params).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn predictions_agree_with_thresholded_scores() {
    let mut r = rng(51);
    let (x, y) = random_corpus(&mut r, 50, 4, 6);
    let models: Vec<Box<dyn Classifier<f64>>> = vec![
        Box::new(KnnModel::fit(x.view(), &y, 5).unwrap()),
        Box::new(TreeModel::fit(x.view(), &y, TreeParams { max_depth: Some(3), ..TreeParams::default() }).unwrap()),
        Box::new(SvmModel::fit(x.view(), &y, &SvmParams::new(1.0, Kernel::Rbf { gamma: 0.3 })).unwrap()),
        Box::new(
            ForestModel::fit(
                x.view(),
                &y,
                ForestParams { n_trees: 15, max_features: 2, max_depth: None, min_samples_leaf: 1, bootstrap: true, seed: 1 },
            )
            .unwrap(),
        ),
    ];
    for m in &models {
        for i in 0..50 {
            let s = m.score(x.row(i));
            if s != m.threshold() {
                assert_eq!(m.predict(x.row(i)), s >= m.threshold());
            }
        }
    }
}
