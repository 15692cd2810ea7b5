use rand::Rng;

use nc_core::models::{ce_loss_and_grad, one_hot, MlpModel, UfmModel};
use nc_core::rng;
use nc_core::theory::psi;
use nc_core::DenseMatrix;

const STEP: f64 = 1e-5;

fn random_labels(n: usize, k: usize, seed: u64) -> Vec<usize> {
    // Cover every class, then fill deterministically.
    let mut r = rng::seeded(seed);
    (0..n)
        .map(|i| if i < k { i } else { r.random_range(0..k) })
        .collect()
}

/// Central-difference derivative of `f` with respect to every entry of `x`.
fn numeric_grad(x: &DenseMatrix, mut f: impl FnMut(&DenseMatrix) -> f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let mut plus = x.clone();
            plus[(r, c)] += STEP;
            let mut minus = x.clone();
            minus[(r, c)] -= STEP;
            out[(r, c)] = (f(&plus) - f(&minus)) / (2.0 * STEP);
        }
    }
    out
}

fn assert_close_rel(analytic: &DenseMatrix, numeric: &DenseMatrix, tol: f64) {
    let scale = analytic.max_abs().max(1e-3);
    let diff = analytic.max_abs_diff(numeric).unwrap();
    assert!(diff <= tol * scale, "max diff {diff:e} vs scale {scale:e}");
}

#[test]
fn ce_gradients_match_finite_differences() {
    for seed in 0..5 {
        let mut r = rng::seeded(seed);
        let (k, d, n) = (4, 6, 8);
        let w = rng::gaussian_matrix(k, d, 1.0, &mut r);
        let x = rng::gaussian_matrix(d, n, 1.0, &mut r);
        let y = one_hot(&random_labels(n, k, seed + 50), k).unwrap();
        let out = ce_loss_and_grad(&w, &x, &y).unwrap();
        let gw = numeric_grad(&w, |w| ce_loss_and_grad(w, &x, &y).unwrap().loss);
        let gx = numeric_grad(&x, |x| ce_loss_and_grad(&w, x, &y).unwrap().loss);
        assert_close_rel(&out.grad_w, &gw, 1e-6);
        assert_close_rel(&out.grad_x, &gx, 1e-6);
    }
}

#[test]
fn softmax_columns_sum_to_one_and_loss_non_negative() {
    let mut r = rng::seeded(7);
    let w = rng::gaussian_matrix(5, 3, 3.0, &mut r);
    let x = rng::gaussian_matrix(3, 11, 3.0, &mut r);
    let y = one_hot(&random_labels(11, 5, 1), 5).unwrap();
    let out = ce_loss_and_grad(&w, &x, &y).unwrap();
    for s in out.probs.column_ones_product().as_slice() {
        assert!((s - 1.0).abs() < 1e-12);
    }
    assert!(out.loss >= 0.0);
}

#[test]
fn weight_gradient_has_zero_column_sums() {
    for seed in 0..200 {
        let mut r = rng::seeded(1000 + seed);
        let k = 2 + (seed as usize % 9);
        let w = rng::gaussian_matrix(k, 5, 2.0, &mut r);
        let x = rng::gaussian_matrix(5, 13, 2.0, &mut r);
        let y = one_hot(&random_labels(13, k, seed), k).unwrap();
        let g = ce_loss_and_grad(&w, &x, &y).unwrap().grad_w;
        assert!(g.column_ones_product().max_abs() < 1e-12);
    }
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let (d, k, n) = (5, 3, 7);
    let model = MlpModel::new(d, &[8, 8], k, 21).unwrap();
    // Larger weights so that ReLU kinks are rarely near the evaluation point.
    let mut model = model;
    for p in model.params_mut() {
        *p = p.scale(10.0);
    }
    let mut r = rng::seeded(22);
    let x = rng::gaussian_matrix(d, n, 1.0, &mut r);
    let y = one_hot(&random_labels(n, k, 3), k).unwrap();
    let out = model.forward_backward(&x, &y).unwrap();
    let n_params = model.params().len();
    for i in 0..n_params {
        let base = model.params()[i].clone();
        let numeric = numeric_grad(&base, |p| {
            let mut m = model.clone();
            *m.params_mut()[i] = p.clone();
            m.forward_backward(&x, &y).unwrap().loss
        });
        assert_close_rel(&out.grads[i], &numeric, 1e-6);
    }
    // Classifier gradient keeps zero column sums behind any backbone.
    assert!(out.grads[n_params - 1].column_ones_product().max_abs() < 1e-12);
}

#[test]
fn ufm_two_parameter_family_gradient() {
    for k in [3usize, 4, 10] {
        let base = UfmModel::theorem_setting(k).unwrap();
        for &(a, b) in &[(0.0, 0.0), (0.3, 0.1), (1.7, 0.45), (-0.2, 0.9)] {
            let mut m = base.clone();
            m.w = DenseMatrix::from_fn(k, k, |i, j| if i == j { a } else { -b });
            let g = m.loss_and_grads().unwrap().grad_w;
            let p = psi(a, b, k, k);
            let expected =
                DenseMatrix::from_fn(k, k, |i, j| if i == j { p * (1.0 - k as f64) } else { p });
            assert!(
                g.max_abs_diff(&expected).unwrap() < 1e-12,
                "K={k}, a={a}, b={b}"
            );
        }
    }
}

#[test]
fn ufm_logits_scale_with_a_plus_b() {
    let k = 6;
    let mut m = UfmModel::theorem_setting(k).unwrap();
    let (a, b) = (0.8, 0.3);
    m.w = DenseMatrix::from_fn(k, k, |i, j| if i == j { a } else { -b });
    let wh = m.logits().unwrap();
    assert!(wh.max_abs_diff(&m.h.scale(a + b)).unwrap() < 1e-14);
}
