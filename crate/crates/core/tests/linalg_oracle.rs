use nalgebra::DMatrix;
use nc_core::metrics::simplex_etf;
use nc_core::rng;
use nc_core::tensor::{pseudo_inverse, singular_values, Svd, DEFAULT_RANK_TOLERANCE};
use nc_core::DenseMatrix;

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[test]
fn singular_values_match_nalgebra() {
    let mut r = rng::seeded(100);
    for (rows, cols) in [(3, 3), (5, 2), (2, 6), (8, 8), (10, 4)] {
        let a = rng::gaussian_matrix(rows, cols, 1.0, &mut r);
        let ours = singular_values(&a).unwrap();
        let theirs = sorted_desc(to_na(&a).singular_values().iter().copied().collect());
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() < 1e-12 * theirs[0], "{rows}x{cols}: {x} vs {y}");
        }
    }
}

#[test]
fn svd_reconstructs_and_is_orthonormal() {
    let mut r = rng::seeded(101);
    let a = rng::gaussian_matrix(7, 4, 1.0, &mut r);
    let svd = Svd::compute(&a).unwrap();
    let us = DenseMatrix::from_fn(7, 4, |i, k| svd.u[(i, k)] * svd.singular_values[k]);
    assert!(us.matmul(&svd.v.transpose()).unwrap().max_abs_diff(&a).unwrap() < 1e-12);
    let vtv = svd.v.transpose().matmul(&svd.v).unwrap();
    assert!(vtv.max_abs_diff(&DenseMatrix::identity(4)).unwrap() < 1e-13);
    let utu = svd.u.transpose().matmul(&svd.u).unwrap();
    assert!(utu.max_abs_diff(&DenseMatrix::identity(4)).unwrap() < 1e-13);
}

#[test]
fn pseudo_inverse_matches_nalgebra_on_rank_deficient() {
    let mut r = rng::seeded(102);
    // Rank 3 product of 6x3 and 3x5 factors.
    let a = rng::gaussian_matrix(6, 3, 1.0, &mut r)
        .matmul(&rng::gaussian_matrix(3, 5, 1.0, &mut r))
        .unwrap();
    let ours = pseudo_inverse(&a, DEFAULT_RANK_TOLERANCE).unwrap();
    let theirs = to_na(&a).pseudo_inverse(1e-9).unwrap();
    let theirs = DenseMatrix::new(5, 6, theirs.transpose().as_slice().to_vec()).unwrap();
    assert!(ours.max_abs_diff(&theirs).unwrap() < 1e-10);
    assert_eq!(Svd::compute(&a).unwrap().rank(DEFAULT_RANK_TOLERANCE), 3);
}

#[test]
fn simplex_etf_spectrum() {
    let k = 5;
    let etf = simplex_etf(k).unwrap();
    let s = singular_values(&etf.transpose().matmul(&etf).unwrap()).unwrap();
    for v in &s[..4] {
        assert!((v - 0.25).abs() < 1e-14);
    }
    assert!(s[4].abs() < 1e-14);
    assert!((etf.frobenius_norm() - 1.0).abs() < 1e-15);
    // (M*)² = M*/√(K−1), not M*.
    let sq = etf.matmul(&etf).unwrap();
    assert!(sq.max_abs_diff(&etf.scale(0.5)).unwrap() < 1e-15);
    let g = etf.transpose().matmul(&etf).unwrap();
    let normalized = g.scale(1.0 / g.frobenius_norm());
    assert!(normalized.max_abs_diff(&etf).unwrap() < 1e-15);
}

#[test]
fn matrix_text_round_trip_random() {
    let mut r = rng::seeded(103);
    let a = rng::gaussian_matrix(4, 9, 1e5, &mut r);
    assert_eq!(DenseMatrix::from_text(&a.to_text()).unwrap(), a);
}
