//! Continuous-time limit of momentum SGD row sums:
//! `α̇(t) = −λ∫₀ᵗ β^{t−τ} α(τ) dτ`, `α(0) = α₀`.
//!
//! Differentiating once more gives `α̈ − log(β)·α̇ + λα = 0` with `α̇(0) = 0`,
//! whose characteristic roots are `r = (log β ± √(log²β − 4λ))/2`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeRoots {
    /// `α/α₀ = A·e^{r₁t} + B·e^{r₂t}`.
    Real { r1: f64, r2: f64, a: f64, b: f64 },
    /// `α/α₀ = e^{σt}(1 − σt)`.
    Double { sigma: f64 },
    /// `α/α₀ = e^{σt}(cos ωt + c·sin ωt)` with `c = −σ/ω`.
    Complex { sigma: f64, omega: f64, c: f64 },
}

fn check_params(lambda: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

pub fn ode_roots(lambda: f64, beta: f64) -> Result<OdeRoots> {
    check_params(lambda, beta)?;
    let lb = beta.ln();
    let disc = lb * lb - 4.0 * lambda;
    Ok(if disc > 0.0 {
        let s = disc.sqrt();
        let r1 = (lb + s) / 2.0;
        let r2 = (lb - s) / 2.0;
        OdeRoots::Real {
            r1,
            r2,
            a: r2 / (r2 - r1),
            b: -r1 / (r2 - r1),
        }
    } else if disc == 0.0 {
        OdeRoots::Double { sigma: lb / 2.0 }
    } else {
        let sigma = lb / 2.0;
        let omega = (-disc).sqrt() / 2.0;
        OdeRoots::Complex {
            sigma,
            omega,
            c: -sigma / omega,
        }
    })
}

pub fn ode_alpha_closed_form(t: f64, alpha0: f64, lambda: f64, beta: f64) -> Result<f64> {
    let ratio = match ode_roots(lambda, beta)? {
        OdeRoots::Real { r1, r2, a, b } => a * (r1 * t).exp() + b * (r2 * t).exp(),
        OdeRoots::Double { sigma } => (sigma * t).exp() * (1.0 - sigma * t),
        OdeRoots::Complex { sigma, omega, c } => {
            (sigma * t).exp() * ((omega * t).cos() + c * (omega * t).sin())
        }
    };
    Ok(alpha0 * ratio)
}

/// Constant `C` for which `|α(t)| ≤ C·α₀·e^{−λt/log β⁻¹}`: the sum of the
/// absolute mode weights, `|A| + |B|` (real roots) or `√(1 + c²)` (complex).
///
/// The decay rate `λ/log β⁻¹` never exceeds the slowest mode's rate when
/// `2λ ≤ log²β`, so the bound holds for all `t` in that regime.
pub fn ode_bound_constant(lambda: f64, beta: f64) -> Result<f64> {
    Ok(match ode_roots(lambda, beta)? {
        OdeRoots::Real { a, b, .. } => a.abs() + b.abs(),
        // Here λ/log β⁻¹ = −σ/2, and max_x e^{−x/2}(1 + x) = 2e^{−1/2}.
        OdeRoots::Double { .. } => 2.0 * (-0.5f64).exp(),
        OdeRoots::Complex { c, .. } => (1.0 + c * c).sqrt(),
    })
}

/// `C·α₀·exp(−λt/log β⁻¹)`. Requires `2λ/log β⁻¹ < 1`.
pub fn ode_alpha_bound(t: f64, alpha0: f64, lambda: f64, beta: f64, c: f64) -> Result<f64> {
    check_params(lambda, beta)?;
    let l = -beta.ln();
    if !(2.0 * lambda / l < 1.0) {
        return Err(Error::domain(format!(
            "bound needs 2*lambda/log(1/beta) < 1, got {}",
            2.0 * lambda / l
        )));
    }
    Ok(c * alpha0 * (-lambda * t / l).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_alpha0() {
        for (l, b) in [(0.002, 0.9), (0.5, 0.9), (0.01, 0.5)] {
            assert!((ode_alpha_closed_form(0.0, 3.0, l, b).unwrap() - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn roots_at_beta_point_nine() {
        match ode_roots(0.002, 0.9).unwrap() {
            OdeRoots::Real { r1, r2, a, b } => {
                assert!((r1 + 0.024_837_672_372_085).abs() < 1e-12);
                assert!((r2 + 0.080_522_843_285_741).abs() < 1e-12);
                assert!((a + b - 1.0).abs() < 1e-15);
                let bound_rate = -0.002 / -(0.9f64.ln());
                assert!((bound_rate + 0.018_982_443_162_060).abs() < 1e-12);
                assert!(r1 < bound_rate);
            }
            other => panic!("expected real roots, got {other:?}"),
        }
    }

    #[test]
    fn zero_initial_slope() {
        for (l, b) in [(0.002, 0.9), (0.5, 0.9)] {
            let h = 1e-6;
            let d = (ode_alpha_closed_form(h, 1.0, l, b).unwrap()
                - ode_alpha_closed_form(-h, 1.0, l, b).unwrap())
                / (2.0 * h);
            assert!(d.abs() < 1e-8);
        }
    }

    #[test]
    fn complex_regime_is_finite() {
        assert!(matches!(ode_roots(0.5, 0.9).unwrap(), OdeRoots::Complex { .. }));
        let v = ode_alpha_closed_form(40.0, 1.0, 0.5, 0.9).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn domain_errors() {
        assert!(ode_alpha_closed_form(1.0, 1.0, 0.002, 1.0).is_err());
        assert!(ode_alpha_closed_form(1.0, 1.0, 0.0, 0.9).is_err());
        assert!(ode_alpha_bound(1.0, 1.0, 0.06, 0.9, 1.0).is_err());
    }

    #[test]
    fn bound_holds_on_grid() {
        let c = ode_bound_constant(0.002, 0.9).unwrap();
        for i in 0..=500 {
            let t = i as f64 * 0.1;
            let a = ode_alpha_closed_form(t, 1.0, 0.002, 0.9).unwrap();
            assert!(a.abs() <= ode_alpha_bound(t, 1.0, 0.002, 0.9, c).unwrap());
        }
    }
}
