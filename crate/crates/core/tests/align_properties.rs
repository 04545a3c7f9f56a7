mod common;

use common::*;
use lsimpute::align::{align_baseline, fit_alignment};
use lsimpute::EmbeddingMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn fit_error(x: &DMatrix<f64>, y: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (x * q - y).norm()
}

#[test]
fn fitted_map_beats_random_orthogonal_maps() {
    let mut r = rng(1);
    let x = DMatrix::from_fn(60, 8, |_, _| gaussian(&mut r));
    let y = DMatrix::from_fn(60, 8, |_, _| gaussian(&mut r));
    let m = fit_alignment(&x, &y).unwrap();
    let best = fit_error(&x, &y, &m.q);
    assert!((best - m.residual).abs() < 1e-9);
    for _ in 0..100 {
        let p = random_orthogonal(&mut r, 8);
        assert!(fit_error(&x, &y, &p) >= best - 1e-9);
    }
}

#[test]
fn rotating_the_target_rotates_the_map() {
    let mut r = rng(2);
    let x = DMatrix::from_fn(40, 6, |_, _| gaussian(&mut r));
    let y = DMatrix::from_fn(40, 6, |_, _| gaussian(&mut r));
    let s = random_orthogonal(&mut r, 6);
    let q = fit_alignment(&x, &y).unwrap().q;
    let q2 = fit_alignment(&x, &(&y * &s)).unwrap().q;
    assert!((q2 - q * s).amax() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_is_orthogonal(seed in any::<u64>(), n in 1usize..30, d in 1usize..10) {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(n, d, |_, _| gaussian(&mut r));
        let y = DMatrix::from_fn(n, d, |_, _| gaussian(&mut r));
        let m = fit_alignment(&x, &y).unwrap();
        prop_assert!(m.orthogonality_error() < 1e-8);
        prop_assert_eq!(m.anchors, n);
    }

    #[test]
    fn exact_rotation_is_recovered(seed in any::<u64>(), d in 2usize..12) {
        let mut r = rng(seed);
        let q = random_orthogonal(&mut r, d);
        let x = DMatrix::from_fn(3 * d, d, |_, _| gaussian(&mut r));
        let m = fit_alignment(&x, &(&x * &q)).unwrap();
        prop_assert!((m.q - q).amax() < 1e-6);
    }
}

#[test]
fn baseline_keeps_trained_vectors_and_maps_the_rest() {
    let mut r = rng(3);
    let q = random_orthogonal(&mut r, 3);
    let pts = random_points(&mut r, 12, 3);
    let dom = matrix(&pts);
    let sem = EmbeddingMatrix::from_rows(
        3,
        (0..8).map(|i| {
            let v: Vec<f64> = (0..3).map(|c| (0..3).map(|k| pts[i][k] * q[(k, c)]).sum()).collect();
            (format!("t{i}"), v)
        }),
    )
    .unwrap();
    let (mapped, map) = align_baseline(&sem, &dom).unwrap();
    assert_eq!(mapped.tokens(), ["t8", "t9", "t10", "t11"]);
    for (row, i) in (8..12).enumerate() {
        let want: Vec<f64> = (0..3).map(|c| (0..3).map(|k| pts[i][k] * q[(k, c)]).sum()).collect();
        assert!(mapped.row(row).iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-9));
    }
    assert!(map.orthogonality_error() < 1e-10);
}
