use nc_core::stats::{
    ln_gamma, ols_fit, regularized_incomplete_beta, student_t_cdf, student_t_quantile,
    student_t_two_sided_p,
};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

const DFS: [f64; 8] = [1.0, 2.0, 3.0, 4.5, 8.0, 10.0, 30.0, 200.0];

#[test]
fn ln_gamma_matches_statrs() {
    for i in 1..400 {
        let x = i as f64 * 0.137;
        let ours = ln_gamma(x);
        let theirs = statrs::function::gamma::ln_gamma(x);
        assert!((ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0), "x={x}");
    }
}

#[test]
fn incomplete_beta_matches_statrs() {
    for &a in &[0.5, 1.0, 2.5, 7.0, 40.0] {
        for &b in &[0.5, 1.0, 3.0, 15.0] {
            for i in 0..=50 {
                let x = i as f64 / 50.0;
                let ours = regularized_incomplete_beta(x, a, b);
                let theirs = statrs::function::beta::beta_reg(a, b, x);
                assert!((ours - theirs).abs() < 1e-12, "a={a} b={b} x={x}");
            }
        }
    }
}

#[test]
fn t_cdf_and_quantile_match_statrs() {
    for df in DFS {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in -40..=40 {
            let t = i as f64 * 0.25;
            assert!((student_t_cdf(t, df) - dist.cdf(t)).abs() < 1e-12, "df={df} t={t}");
            let p = 2.0 * dist.cdf(-t.abs());
            assert!((student_t_two_sided_p(t, df) - p).abs() < 1e-12);
        }
        for p in [0.005, 0.025, 0.1, 0.5, 0.9, 0.975, 0.995] {
            let q = student_t_quantile(p, df);
            assert!((student_t_cdf(q, df) - p).abs() < 1e-13, "df={df} p={p}");
            assert!((q - dist.inverse_cdf(p)).abs() < 1e-8 * q.abs().max(1.0), "df={df} p={p}");
        }
    }
}

#[test]
fn five_point_fixture() {
    // y = x + (0.1, −0.1, 0, 0.1, −0.1): Sxx = 10, slope 0.98, SSE = 0.036.
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [1.1, 1.9, 3.0, 4.1, 4.9];
    let f = ols_fit(&x, &y).unwrap();
    let se = (0.036f64 / 3.0 / 10.0).sqrt();
    let t = 0.98 / se;
    let dist = StudentsT::new(0.0, 1.0, 3.0).unwrap();
    let q = dist.inverse_cdf(0.975);
    assert!((f.slope - 0.98).abs() < 1e-10);
    assert!((f.intercept - 0.06).abs() < 1e-10);
    assert!((f.se - se).abs() < 1e-10);
    assert!((f.t_value - t).abs() < 1e-10 * t);
    assert!((f.p_value - 2.0 * dist.cdf(-t)).abs() < 1e-10);
    assert!((f.ci95_low - (0.98 - q * se)).abs() < 1e-10);
    assert!((f.ci95_high - (0.98 + q * se)).abs() < 1e-10);
    let syy: f64 = y.iter().map(|v| (v - 3.0) * (v - 3.0)).sum();
    assert!((f.r_squared - (1.0 - 0.036 / syy)).abs() < 1e-10);
    assert!((f.adj_r_squared - (1.0 - (1.0 - f.r_squared) * 4.0 / 3.0)).abs() < 1e-10);
}

fn cloud() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
        )
    })
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn identities((x, y) in cloud()) {
        let f = ols_fit(&x, &y).unwrap();
        let r = correlation(&x, &y);
        prop_assert!((f.r_squared - r * r).abs() < 1e-9);
        prop_assert!((f.t_value * f.t_value - f.f_statistic).abs() <= 1e-9 * f.f_statistic.max(1.0));
        prop_assert!(f.ci95_low <= f.slope && f.slope <= f.ci95_high);
        prop_assert!((0.0..=1.0).contains(&f.p_value));
    }

    #[test]
    fn shift_and_scale((x, y) in cloud(), sx in 0.5..4.0f64, sy in 0.5..4.0f64, dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let f = ols_fit(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| sx * v + dx).collect();
        let y2: Vec<f64> = y.iter().map(|v| sy * v + dy).collect();
        let g = ols_fit(&x2, &y2).unwrap();
        prop_assert!((g.slope - f.slope * sy / sx).abs() < 1e-9 * (1.0 + f.slope.abs() * sy / sx));
        prop_assert!((g.t_value - f.t_value).abs() < 1e-7 * (1.0 + f.t_value.abs()));
        prop_assert!((g.p_value - f.p_value).abs() < 1e-8);
        prop_assert!((g.r_squared - f.r_squared).abs() < 1e-9);
    }
}
