//! One-step decomposition of the change in `α` under coupled SGD.

use crate::error::Result;
use crate::tensor::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementDecomposition {
    /// `(α(W_{t+1}) − α(W_t))/η` from an actual coupled step.
    pub lhs: f64,
    /// `−2βω − 2γ − 2λα + ην`.
    pub rhs: f64,
    pub omega: f64,
    pub gamma: f64,
    pub nu: f64,
    pub alpha: f64,
}

/// `⟨A, Ĵ⟩` with `Ĵ = (1/K)𝟙𝟙ᵀ`: the sum of all entries over `K`.
fn j_hat_inner(a: &DenseMatrix) -> f64 {
    a.as_slice().iter().sum::<f64>() / a.rows() as f64
}

fn alpha_of(w: &DenseMatrix) -> f64 {
    let m = w.column_ones_product();
    m.as_slice().iter().map(|v| v * v).sum::<f64>() / w.rows() as f64
}

/// Takes one coupled step `V' = βV + G + λW`, `W' = W − ηV'` and evaluates
/// both sides of the increment identity with
/// `ω = ⟨VWᵀ, Ĵ⟩`, `γ = ⟨GWᵀ, Ĵ⟩`, `ν = ⟨V'V'ᵀ, Ĵ⟩`.
pub fn alpha_increment_decomposition(
    w: &DenseMatrix,
    v: &DenseMatrix,
    g: &DenseMatrix,
    eta: f64,
    beta: f64,
    lambda: f64,
) -> Result<IncrementDecomposition> {
    w.check_same_shape("alpha_increment_decomposition", v)?;
    w.check_same_shape("alpha_increment_decomposition", g)?;
    let v_next = v.scale(beta).add(g)?.add(&w.scale(lambda))?;
    let w_next = w.sub(&v_next.scale(eta))?;
    let alpha = alpha_of(w);
    let lhs = (alpha_of(&w_next) - alpha) / eta;

    let wt = w.transpose();
    let omega = j_hat_inner(&v.matmul(&wt)?);
    let gamma = j_hat_inner(&g.matmul(&wt)?);
    let nu = j_hat_inner(&v_next.matmul(&v_next.transpose())?);
    let rhs = -2.0 * beta * omega - 2.0 * gamma - 2.0 * lambda * alpha + eta * nu;
    Ok(IncrementDecomposition {
        lhs,
        rhs,
        omega,
        gamma,
        nu,
        alpha,
    })
}
