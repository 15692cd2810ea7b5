//! Row-sum dynamics of SGD. The cross-entropy gradient has zero column sums,
//! so `m_t = W_tᵀ𝟙` only feels the weight decay and the momentum.

use serde::Serialize;

/// `α_t = (1 − ηλ)^{2t}·α₀` for decoupled SGD (any momentum).
pub fn alpha_sgd_decoupled(t: u64, alpha0: f64, eta: f64, lambda: f64) -> f64 {
    let shrink = 1.0 - eta * lambda;
    shrink.powi(2 * t as i32) * alpha0
}

/// Roots of `r² − (1 + β − ηλ)r + β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharRoots {
    /// The linear coefficient `1 + β − ηλ`.
    pub trace: f64,
    pub beta: f64,
    pub discriminant: f64,
    /// `(re, im)` of `r₊`.
    pub plus: (f64, f64),
    /// `(re, im)` of `r₋`.
    pub minus: (f64, f64),
    pub spectral_radius: f64,
}

impl CharRoots {
    pub fn is_complex(&self) -> bool {
        self.discriminant < 0.0
    }

    /// `|p(r)|` for a root given as `(re, im)`.
    pub fn residual(&self, (re, im): (f64, f64)) -> f64 {
        // p(r) = r² − c·r + β with r = re + i·im
        let pr = re * re - im * im - self.trace * re + self.beta;
        let pi = 2.0 * re * im - self.trace * im;
        pr.hypot(pi)
    }
}

pub fn char_roots(beta: f64, eta: f64, lambda: f64) -> CharRoots {
    let c = 1.0 + beta - eta * lambda;
    let disc = c * c - 4.0 * beta;
    let (plus, minus, rho) = if disc >= 0.0 {
        let s = disc.sqrt();
        let p = (c + s) / 2.0;
        let m = (c - s) / 2.0;
        ((p, 0.0), (m, 0.0), p.abs().max(m.abs()))
    } else {
        let im = (-disc).sqrt() / 2.0;
        ((c / 2.0, im), (c / 2.0, -im), beta.sqrt())
    };
    CharRoots {
        trace: c,
        beta,
        discriminant: disc,
        plus,
        minus,
        spectral_radius: rho,
    }
}

/// `m₁ = (1 − ηλ)m₀`, `m_{t+1} = (1 + β − ηλ)m_t − βm_{t−1}`. Returns
/// `m₀ … m_steps`.
pub fn rowsum_recursion_coupled(
    m0: &[f64],
    eta: f64,
    beta: f64,
    lambda: f64,
    steps: usize,
) -> Vec<Vec<f64>> {
    let c = 1.0 + beta - eta * lambda;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(m0.to_vec());
    if steps == 0 {
        return out;
    }
    out.push(m0.iter().map(|v| (1.0 - eta * lambda) * v).collect());
    for t in 1..steps {
        let next = out[t]
            .iter()
            .zip(&out[t - 1])
            .map(|(cur, prev)| c * cur - beta * prev)
            .collect();
        out.push(next);
    }
    out
}

/// `(1/K)‖m‖²`.
pub fn rowsum_alpha(m: &[f64], k: usize) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>() / k as f64
}

/// `C = max_{t<fit_steps} ‖m_t‖ / (ρᵗ‖m₀‖)`, the empirical constant in
/// `‖m_t‖ ≤ Cρᵗ‖m₀‖`.
pub fn fit_rowsum_constant(ms: &[Vec<f64>], rho: f64, fit_steps: usize) -> f64 {
    let norm = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let n0 = norm(&ms[0]);
    ms.iter()
        .take(fit_steps)
        .enumerate()
        .map(|(t, m)| norm(m) / (rho.powi(t as i32) * n0))
        .fold(0.0, f64::max)
}

/// A constant valid for every `t`: with `‖m_t‖ = |s_t|·‖m₀‖` and
/// `s_t = A·r₊ᵗ + B·r₋ᵗ`, the bound `|s_t| ≤ (|A| + |B|)ρᵗ` holds. Complex
/// roots give `s_t = ρᵗ(cos tθ + κ sin tθ)` and the constant `√(1 + κ²)`.
/// `None` at a double root, where `s_t` carries a factor of `t`.
pub fn rowsum_bound_constant(beta: f64, eta: f64, lambda: f64) -> Option<f64> {
    let roots = char_roots(beta, eta, lambda);
    let s1 = 1.0 - eta * lambda;
    if roots.is_complex() {
        let rho = roots.spectral_radius;
        let theta = roots.plus.1.atan2(roots.plus.0);
        let kappa = (s1 / rho - theta.cos()) / theta.sin();
        Some((1.0 + kappa * kappa).sqrt())
    } else {
        let (r1, r2) = (roots.plus.0, roots.minus.0);
        if r1 == r2 {
            return None;
        }
        let a = (s1 - r2) / (r1 - r2);
        let b = (r1 - s1) / (r1 - r2);
        Some(a.abs() + b.abs())
    }
}
