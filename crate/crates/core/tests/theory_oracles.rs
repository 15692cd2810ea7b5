use rand::Rng;

use nc_core::metrics::nc0_alpha;
use nc_core::models::UfmModel;
use nc_core::optim::{step_signgd_coupled, step_signgd_decoupled};
use nc_core::rng;
use nc_core::theory::{
    alpha_signgd_decoupled, alpha_signgd_decoupled_limit, char_roots, coupled_signgd_scalar_step,
    fit_rowsum_constant, ode_alpha_bound, ode_alpha_closed_form, ode_bound_constant,
    rowsum_bound_constant, rowsum_recursion_coupled, CoupledSignState,
};
use nc_core::DenseMatrix;

#[test]
fn char_roots_solve_polynomial() {
    let mut r = rng::seeded(900);
    for _ in 0..1000 {
        let beta: f64 = r.random_range(0.0..0.999);
        let el: f64 = r.random_range(0.0..4.0);
        let roots = char_roots(beta, 1.0, el);
        assert!(roots.residual(roots.plus) < 1e-12);
        assert!(roots.residual(roots.minus) < 1e-12);
        let stable = el > 0.0 && el < 2.0 * (1.0 + beta);
        assert_eq!(roots.spectral_radius < 1.0, stable, "beta={beta}, el={el}");
    }
}

#[test]
fn rowsum_norm_bounded_by_spectral_radius() {
    let mut r = rng::seeded(901);
    for _ in 0..100 {
        let beta: f64 = r.random_range(0.0..0.99);
        let el: f64 = r.random_range(0.001..2.0 * (1.0 + beta) - 0.001);
        let rho = char_roots(beta, 1.0, el).spectral_radius;
        let c = rowsum_bound_constant(beta, 1.0, el).expect("distinct roots");
        let m0 = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), 0.5];
        let ms = rowsum_recursion_coupled(&m0, 1.0, beta, el, 500);
        assert!(fit_rowsum_constant(&ms, rho, 5) <= c * (1.0 + 1e-12));
        // Every coordinate follows the same scalar sequence, so compare
        // coordinate-wise, and stop before the values go subnormal.
        for (t, m) in ms.iter().enumerate() {
            if rho.powi(t as i32) < 1e-250 {
                break;
            }
            for (v, v0) in m.iter().zip(&m0) {
                let bound = c * rho.powi(t as i32) * v0.abs();
                assert!(v.abs() <= bound * (1.0 + 1e-9), "t={t} beta={beta} el={el}");
            }
        }
    }
}

#[test]
fn early_fit_can_underestimate_the_constant() {
    // A slowly rotating complex pair: the first five steps miss the peak.
    let (beta, el) = (0.8077, 0.0109);
    let rho = char_roots(beta, 1.0, el).spectral_radius;
    let ms = rowsum_recursion_coupled(&[1.0], 1.0, beta, el, 500);
    let fitted = fit_rowsum_constant(&ms, rho, 5);
    let worst = ms
        .iter()
        .enumerate()
        .map(|(t, m)| m[0].abs() / rho.powi(t as i32))
        .fold(0.0, f64::max);
    assert!(worst > 2.0 * fitted);
}

/// Crank–Nicolson on `α̇ = −λI`, `İ = α + log(β)·I`, with `I` the memory integral.
fn integrate_ode(alpha0: f64, lambda: f64, beta: f64, dt: f64, t_end: f64) -> Vec<(f64, f64)> {
    let lb = beta.ln();
    // x' = A x with A = [[0, −λ], [1, lb]]; (I − dt/2 A) x₊ = (I + dt/2 A) x.
    let h = dt / 2.0;
    let (m11, m12, m21, m22) = (1.0, h * lambda, -h, 1.0 - h * lb);
    let det = m11 * m22 - m12 * m21;
    let (mut a, mut i) = (alpha0, 0.0);
    let steps = (t_end / dt).round() as usize;
    let mut out = vec![(0.0, a)];
    for s in 1..=steps {
        let ra = a - h * lambda * i;
        let ri = i + h * (a + lb * i);
        let na = (m22 * ra - m12 * ri) / det;
        let ni = (-m21 * ra + m11 * ri) / det;
        a = na;
        i = ni;
        out.push((s as f64 * dt, a));
    }
    out
}

#[test]
fn ode_closed_form_matches_direct_integration() {
    for lambda in [0.001, 0.002, 0.05] {
        let numeric = integrate_ode(2.0, lambda, 0.9, 1e-3, 50.0);
        for &(t, a) in numeric.iter().step_by(500) {
            let cf = ode_alpha_closed_form(t, 2.0, lambda, 0.9).unwrap();
            assert!((cf - a).abs() <= 1e-4 * cf.abs().max(1e-3), "t={t}: {cf} vs {a}");
        }
    }
}

#[test]
fn ode_closed_form_satisfies_integral_equation() {
    let (alpha0, beta) = (1.0, 0.9);
    for lambda in [0.001, 0.002] {
        let f = |t: f64| ode_alpha_closed_form(t, alpha0, lambda, beta).unwrap();
        for t in [1.0, 5.0, 17.0, 33.0, 50.0] {
            let h = 1e-4;
            let deriv = (f(t + h) - f(t - h)) / (2.0 * h);
            let n = 20_000;
            let dtau = t / n as f64;
            let g = |tau: f64| beta.powf(t - tau) * f(tau);
            let mut integral = 0.5 * (g(0.0) + g(t));
            for j in 1..n {
                integral += g(j as f64 * dtau);
            }
            integral *= dtau;
            assert!((deriv + lambda * integral).abs() < 1e-6);
        }
        let c = ode_bound_constant(lambda, beta).unwrap();
        for j in 0..=500 {
            let t = j as f64 * 0.1;
            assert!(f(t) <= ode_alpha_bound(t, alpha0, lambda, beta, c).unwrap());
        }
    }
}

#[test]
fn decoupled_signgd_matrix_matches_closed_form() {
    for k in [3, 4, 10] {
        let (eta, lambda) = (0.1, 0.5);
        let mut model = UfmModel::theorem_setting(k).unwrap();
        for t in 1..=400u64 {
            let g = model.loss_and_grads().unwrap().grad_w;
            step_signgd_decoupled(&mut model.w, &g, eta, lambda).unwrap();
            let cf = alpha_signgd_decoupled(t, k, eta, lambda).unwrap();
            assert!((nc0_alpha(&model.w) - cf).abs() <= 1e-9 * cf.max(1e-12));
        }
        let limit = alpha_signgd_decoupled_limit(k, lambda).unwrap();
        assert!((nc0_alpha(&model.w) - limit).abs() <= 0.01 * limit.max(1e-12));
    }
}

#[test]
fn coupled_signgd_matrix_follows_scalar_recursion() {
    let (k, eta, lambda) = (4, 0.05, 0.5);
    let mut model = UfmModel::theorem_setting(k).unwrap();
    let mut state = CoupledSignState::initial(k, k, eta);
    for _ in 0..300 {
        let g = model.loss_and_grads().unwrap().grad_w;
        step_signgd_coupled(&mut model.w, &g, eta, lambda).unwrap();
        state = coupled_signgd_scalar_step(&state, k, k, lambda);
        let (diag, off) = state.weight_entries();
        let expected = DenseMatrix::from_fn(k, k, |i, j| if i == j { diag } else { off });
        assert!(model.w.max_abs_diff(&expected).unwrap() < 1e-12);
        assert!((nc0_alpha(&model.w) - state.alpha(k)).abs() < 1e-10);
    }
}
