mod common;

use common::*;
use lsimpute::lsi::{impute, knn_mst, nnls, solve_weights, UnreachablePolicy, WeightMatrix};
use lsimpute::{lsi_pipeline, AnchorMap, EmbeddingMatrix, Error, LsiConfig};
use proptest::prelude::*;

fn vecs(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nnls_satisfies_kkt(m in 2usize..10, n in 1usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let cols: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| gaussian(&mut r)).collect()).collect();
        let b: Vec<f64> = (0..m).map(|_| gaussian(&mut r)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let sol = nnls(&refs, &b);
        let mut res = b.clone();
        for (x, c) in sol.x.iter().zip(&cols) {
            prop_assert!(*x >= 0.0);
            res.iter_mut().zip(c).for_each(|(ri, ci)| *ri -= x * ci);
        }
        for (x, c) in sol.x.iter().zip(&cols) {
            // dual w = Aᵀ(b − Ax): ≤ 0 on the zero set, ≈ 0 on the support
            let w: f64 = c.iter().zip(&res).map(|(a, b)| a * b).sum();
            prop_assert!(w <= 1e-8, "dual {w}");
            if *x > 0.0 {
                prop_assert!(w.abs() <= 1e-8, "support dual {w}");
            }
        }
        let oracle = projected_gradient_nnls(&cols, &b, 1e-13);
        prop_assert!(sol.residual_norm <= residual(&cols, &oracle, &b) + 1e-9);
    }

    #[test]
    fn weights_are_convex_neighbour_combinations(pts in vecs(30, 3), k in 1usize..6, n_anchor in 1usize..10) {
        let m = matrix(&pts);
        let g = knn_mst(&m, k).unwrap();
        let anchors: Vec<usize> = (0..n_anchor).map(|i| i * 3).collect();
        let w = solve_weights(&m, &g, &anchors).unwrap();
        for i in 0..30 {
            if anchors.contains(&i) {
                prop_assert_eq!(w.row(i), &[(i, 1.0)][..]);
                continue;
            }
            let s: f64 = w.row(i).iter().map(|e| e.1).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            for &(j, v) in w.row(i) {
                prop_assert!(v > 0.0 && g.neighbors(i).contains(&j));
            }
        }
    }

    #[test]
    fn knn_mst_min_degree_and_mst(pts in vecs(40, 5), k in 1usize..8) {
        let m = matrix(&pts);
        let g = knn_mst(&m, k).unwrap();
        prop_assert!(g.min_degree() >= k);
        let oracle = kruskal_mst(&pts);
        prop_assert_eq!(g.mst_edges(), oracle.as_slice());
        for i in 0..40 {
            for &j in g.neighbors(i) {
                prop_assert!(g.neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn imputation_is_a_fixed_point_inside_the_anchor_hull(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dom = matrix(&random_points(&mut r, 40, 3));
        let sem = EmbeddingMatrix::from_rows(
            2,
            (0..40).step_by(4).map(|i| (format!("t{i}"), vec![gaussian(&mut r), gaussian(&mut r)])),
        )
        .unwrap();
        let cfg = LsiConfig { k: 4, eta: 1e-8, ..LsiConfig::default() };
        let res = lsi_pipeline(&sem, &dom, &cfg).unwrap();
        prop_assert!(res.report.converged);
        prop_assert!(res.report.fixed_point_residual < cfg.eta);
        for c in 0..2 {
            let lo = sem.rows().map(|v| v[c]).fold(f64::INFINITY, f64::min);
            let hi = sem.rows().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
            for v in res.full.rows() {
                prop_assert!(v[c] >= lo - 1e-9 && v[c] <= hi + 1e-9);
            }
        }
        for (i, t) in sem.tokens().iter().enumerate() {
            prop_assert_eq!(res.full.get(t).unwrap(), sem.row(i));
        }
    }
}

#[test]
fn permuting_domain_rows_permutes_the_output() {
    let mut r = rng(9);
    let pts = random_points(&mut r, 50, 4);
    let sem = EmbeddingMatrix::from_rows(
        3,
        (0..50)
            .step_by(5)
            .map(|i| (format!("t{i}"), (0..3).map(|_| gaussian(&mut r)).collect::<Vec<_>>())),
    )
    .unwrap();
    let cfg = LsiConfig {
        k: 5,
        eta: 1e-10,
        ..LsiConfig::default()
    };
    let a = lsi_pipeline(&sem, &matrix(&pts), &cfg).unwrap();
    let perm: Vec<usize> = (0..50).rev().collect();
    let shuffled = EmbeddingMatrix::from_rows(4, perm.iter().map(|&i| (format!("t{i}"), pts[i].clone()))).unwrap();
    let b = lsi_pipeline(&sem, &shuffled, &cfg).unwrap();
    for t in a.full.tokens() {
        let (x, y) = (a.full.get(t).unwrap(), b.full.get(t).unwrap());
        assert!(x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-8), "{t}");
    }
}

#[test]
fn nnls_weights_beat_uniform_weights_on_the_domain() {
    let mut r = rng(30);
    let pts = random_points(&mut r, 30, 4);
    let m = matrix(&pts);
    let g = knn_mst(&m, 5).unwrap();
    let w = solve_weights(&m, &g, &[]).unwrap();
    let err = |i: usize, row: &[(usize, f64)]| -> f64 {
        (0..4)
            .map(|c| (row.iter().map(|&(j, v)| v * pts[j][c]).sum::<f64>() - pts[i][c]).powi(2))
            .sum()
    };
    let total_nnls: f64 = (0..30).map(|i| err(i, w.row(i))).sum();
    let total_uniform: f64 = (0..30)
        .map(|i| {
            let u = 1.0 / g.neighbors(i).len() as f64;
            err(i, &g.neighbors(i).iter().map(|&j| (j, u)).collect::<Vec<_>>())
        })
        .sum();
    assert!(total_nnls < total_uniform, "{total_nnls} vs {total_uniform}");
}

/// Chain a-u-v, with v hanging off u: W_u = {a: α, v: 1−α}, W_v = {u: 1}.
#[test]
fn three_node_chain_matches_closed_form() {
    let alpha = 0.25;
    let w = WeightMatrix::from_rows(vec![vec![], vec![(0, alpha), (2, 1.0 - alpha)], vec![(1, 1.0)]], &[0]).unwrap();
    let sem = EmbeddingMatrix::from_rows(1, [("a", vec![2.0])]).unwrap();
    let tokens: Vec<String> = ["a", "u", "v"].map(String::from).to_vec();
    let anchors = AnchorMap { pairs: vec![(0, 0)] };
    let cfg = LsiConfig {
        eta: 1e-12,
        ..LsiConfig::default()
    };
    let res = impute(&w, &anchors, &sem, &tokens, &cfg).unwrap();
    // [1, −(1−α); −1, 1]·[u; v] = [α·a; 0]  ⇒  u = v = a
    let det = 1.0 - (1.0 - alpha);
    let u = alpha * 2.0 / det;
    assert!((res.full.row(1)[0] - u).abs() < 1e-12);
    assert!((res.full.row(2)[0] - u).abs() < 1e-12);
}

#[test]
fn unreachable_nodes_follow_policy() {
    let w = WeightMatrix::from_rows(vec![vec![], vec![(2, 1.0)], vec![(1, 1.0)]], &[0]).unwrap();
    let sem = EmbeddingMatrix::from_rows(2, [("a", vec![1.0, 3.0])]).unwrap();
    let tokens: Vec<String> = ["a", "x", "y"].map(String::from).to_vec();
    let anchors = AnchorMap { pairs: vec![(0, 0)] };
    let mut cfg = LsiConfig::default();
    let res = impute(&w, &anchors, &sem, &tokens, &cfg).unwrap();
    assert_eq!(res.report.unreachable, ["x", "y"]);
    assert_eq!(res.full.row(1), &[1.0, 3.0]);
    cfg.unreachable_policy = UnreachablePolicy::Error;
    assert!(matches!(
        impute(&w, &anchors, &sem, &tokens, &cfg),
        Err(Error::Unreachable { count: 2, .. })
    ));
}
