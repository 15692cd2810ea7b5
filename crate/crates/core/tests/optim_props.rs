use nc_core::optim::{
    step_adam_family, step_sgd_coupled, step_sgd_decoupled, step_signgd_coupled,
    step_signgd_decoupled, step_signum, AdamParams, OptimizerState,
};
use nc_core::rng::{self, Rng};
use nc_core::theory::{alpha_sgd_decoupled, rowsum_recursion_coupled};
use nc_core::DenseMatrix;

fn sign_limit(lr: f64, coupled_wd: f64, decoupled_wd: f64) -> AdamParams {
    AdamParams {
        lr,
        beta1: 0.0,
        beta2: 0.0,
        eps: 0.0,
        coupled_wd,
        decoupled_wd,
    }
}

fn random_pair(r: &mut Rng) -> (DenseMatrix, DenseMatrix) {
    let p = rng::gaussian_matrix(3, 3, 2.0, r);
    let mut g = rng::gaussian_matrix(3, 3, 1.0, r);
    // Exact zeros exercise sign(0) = 0.
    g[(0, 0)] = 0.0;
    (p, g)
}

#[test]
fn adam_sign_limit_is_bitwise_signgd() {
    let mut r = rng::seeded(500);
    let mut pairs = 0;
    while pairs < 10_000 {
        let (p, g) = random_pair(&mut r);
        let lr = 0.01 + 0.2 * rng::standard_normal(&mut r).abs();
        let wd = 0.5 * rng::standard_normal(&mut r).abs();

        let mut a = p.clone();
        step_signgd_coupled(&mut a, &g, lr, wd).unwrap();
        let mut b = p.clone();
        step_adam_family(&mut b, &g, &mut OptimizerState::for_param(&p), &sign_limit(lr, wd, 0.0))
            .unwrap();
        assert_eq!(a.max_abs_diff(&b).unwrap(), 0.0);
        assert_eq!(a, b);

        let mut c = p.clone();
        step_signgd_decoupled(&mut c, &g, lr, wd).unwrap();
        let mut d = p.clone();
        step_adam_family(&mut d, &g, &mut OptimizerState::for_param(&p), &sign_limit(lr, 0.0, wd))
            .unwrap();
        assert_eq!(c, d);
        pairs += 1;
    }
}

#[test]
fn adam_sign_limit_stays_bitwise_over_many_steps() {
    let mut r = rng::seeded(501);
    let (mut a, _) = random_pair(&mut r);
    let mut b = a.clone();
    let mut state = OptimizerState::for_param(&a);
    for _ in 0..200 {
        let g = rng::gaussian_matrix(3, 3, 1.0, &mut r);
        step_signgd_coupled(&mut a, &g, 0.05, 0.3).unwrap();
        step_adam_family(&mut b, &g, &mut state, &sign_limit(0.05, 0.3, 0.0)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn signum_without_momentum_is_signgd() {
    let mut r = rng::seeded(502);
    for _ in 0..1000 {
        let (p, g) = random_pair(&mut r);
        for coupled in [true, false] {
            let mut a = p.clone();
            step_signum(&mut a, &g, &mut OptimizerState::for_param(&p), 0.1, 0.0, 0.4, coupled)
                .unwrap();
            let mut b = p.clone();
            if coupled {
                step_signgd_coupled(&mut b, &g, 0.1, 0.4).unwrap();
            } else {
                step_signgd_decoupled(&mut b, &g, 0.1, 0.4).unwrap();
            }
            assert_eq!(a, b);
        }
    }
}

#[test]
fn sign_step_displacement_bounds() {
    let mut r = rng::seeded(503);
    let (lr, wd) = (0.1, 0.3);
    for _ in 0..1000 {
        let (p, g) = random_pair(&mut r);
        let mut a = p.clone();
        step_signgd_coupled(&mut a, &g, lr, wd).unwrap();
        for d in a.sub(&p).unwrap().as_slice() {
            assert!(d.abs() == 0.0 || (d.abs() - lr).abs() < 1e-15);
        }
        let mut b = p.clone();
        step_signgd_decoupled(&mut b, &g, lr, wd).unwrap();
        let bound = lr * (1.0 + wd * p.max_abs());
        assert!(b.sub(&p).unwrap().max_abs() <= bound + 1e-15);
    }
}

/// Gaussian matrix with every column summing to zero.
fn centered_gradient(rows: usize, cols: usize, r: &mut Rng) -> DenseMatrix {
    let g = rng::gaussian_matrix(rows, cols, 1.0, r);
    let sums = g.column_ones_product();
    DenseMatrix::from_fn(rows, cols, |i, j| g[(i, j)] - sums[(j, 0)] / rows as f64)
}

fn alpha(w: &DenseMatrix) -> f64 {
    let m = w.column_ones_product();
    m.as_slice().iter().map(|v| v * v).sum::<f64>() / w.rows() as f64
}

#[test]
fn decoupled_row_sums_shrink_geometrically() {
    let mut r = rng::seeded(504);
    let (k, p, lr, beta, wd) = (4, 6, 0.05, 0.9, 0.3);
    let mut w = rng::gaussian_matrix(k, p, 1.0, &mut r);
    let m0 = w.column_ones_product();
    let a0 = alpha(&w);
    let mut state = OptimizerState::for_param(&w);
    for t in 1..=200u64 {
        let g = centered_gradient(k, p, &mut r);
        step_sgd_decoupled(&mut w, &g, &mut state, lr, beta, wd).unwrap();
        let expected = m0.scale((1.0 - lr * wd).powi(t as i32));
        assert!(w.column_ones_product().max_abs_diff(&expected).unwrap() < 1e-12);
        let cf = alpha_sgd_decoupled(t, a0, lr, wd);
        assert!((alpha(&w) - cf).abs() <= 1e-10 * cf);
    }
}

#[test]
fn coupled_row_sums_follow_second_order_recursion() {
    let mut r = rng::seeded(505);
    let (k, p, lr, beta, wd) = (5, 3, 0.1, 0.8, 0.5);
    let mut w = rng::gaussian_matrix(k, p, 1.0, &mut r);
    let m0: Vec<f64> = w.column_ones_product().into_vec();
    let predicted = rowsum_recursion_coupled(&m0, lr, beta, wd, 300);
    let mut state = OptimizerState::for_param(&w);
    for pred in predicted.iter().skip(1) {
        let g = centered_gradient(k, p, &mut r);
        step_sgd_coupled(&mut w, &g, &mut state, lr, beta, wd).unwrap();
        let m = w.column_ones_product();
        for (a, b) in m.as_slice().iter().zip(pred) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
