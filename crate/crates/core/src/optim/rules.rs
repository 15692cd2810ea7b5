//! Single-parameter update rules. Each function mutates `param` (and the state
//! buffers it needs) in place; the arithmetic is written entry-wise so that the
//! reductions between rules hold bit for bit.

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Buffers owned by one parameter tensor. All start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub momentum: DenseMatrix,
    pub second_moment: Option<DenseMatrix>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            momentum: DenseMatrix::zeros(rows, cols),
            second_moment: None,
            step: 0,
        }
    }

    pub fn for_param(param: &DenseMatrix) -> Self {
        Self::new(param.rows(), param.cols())
    }

    fn check(&self, op: &'static str, param: &DenseMatrix, grad: &DenseMatrix) -> Result<()> {
        param.check_same_shape(op, grad)?;
        param.check_same_shape(op, &self.momentum)
    }
}

/// `sign(x)` with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `V ← βV + g`, `W ← (1 − ηλ)W − ηV`.
pub fn step_sgd_decoupled(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    state: &mut OptimizerState,
    lr: f64,
    momentum: f64,
    wd: f64,
) -> Result<()> {
    state.check("step_sgd_decoupled", param, grad)?;
    let shrink = 1.0 - lr * wd;
    for ((p, &g), v) in param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(state.momentum.as_mut_slice())
    {
        *v = momentum * *v + g;
        *p = shrink * *p - lr * *v;
    }
    state.step += 1;
    Ok(())
}

/// `V ← βV + g + λW`, `W ← W − ηV`.
pub fn step_sgd_coupled(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    state: &mut OptimizerState,
    lr: f64,
    momentum: f64,
    wd: f64,
) -> Result<()> {
    state.check("step_sgd_coupled", param, grad)?;
    for ((p, &g), v) in param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(state.momentum.as_mut_slice())
    {
        *v = momentum * *v + g + wd * *p;
        *p -= lr * *v;
    }
    state.step += 1;
    Ok(())
}

/// `W ← W − η(sign(g) + λW)`.
pub fn step_signgd_decoupled(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    lr: f64,
    wd: f64,
) -> Result<()> {
    param.check_same_shape("step_signgd_decoupled", grad)?;
    for (p, &g) in param.as_mut_slice().iter_mut().zip(grad.as_slice()) {
        *p = *p - lr * (sign(g) + wd * *p);
    }
    Ok(())
}

/// `W ← W − η·sign(g + λW)`.
pub fn step_signgd_coupled(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    lr: f64,
    wd: f64,
) -> Result<()> {
    param.check_same_shape("step_signgd_coupled", grad)?;
    for (p, &g) in param.as_mut_slice().iter_mut().zip(grad.as_slice()) {
        *p = *p - lr * sign(g + wd * *p);
    }
    Ok(())
}

/// Sign of a (1 − β)-dampened momentum buffer.
///
/// Coupled: `V ← βV + (1−β)(g + λW)`, `W ← W − η·sign(V)`.
/// Decoupled: `V ← βV + (1−β)g`, `W ← (1 − ηλ)W − η·sign(V)`, evaluated as
/// `W − η(sign(V) + λW)` so that `β = 0` matches SignGD exactly.
pub fn step_signum(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    state: &mut OptimizerState,
    lr: f64,
    momentum: f64,
    wd: f64,
    coupled: bool,
) -> Result<()> {
    state.check("step_signum", param, grad)?;
    let damp = 1.0 - momentum;
    for ((p, &g), v) in param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(state.momentum.as_mut_slice())
    {
        if coupled {
            *v = momentum * *v + damp * (g + wd * *p);
            *p -= lr * sign(*v);
        } else {
            *v = momentum * *v + damp * g;
            *p = *p - lr * (sign(*v) + wd * *p);
        }
    }
    state.step += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub coupled_wd: f64,
    pub decoupled_wd: f64,
}

impl AdamParams {
    /// `β₂ = 0, ε = 0`: the normalizer is `|g|` and the update is a sign step.
    pub fn is_sign_limit(&self) -> bool {
        self.beta2 == 0.0 && self.eps == 0.0
    }
}

/// Adam with both weight-decay placements:
/// `g ← ∇ + λ_c W`, bias-corrected moments, `W ← W − η(m̂/(√v̂ + ε) + λ_d W)`.
pub fn step_adam_family(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    state: &mut OptimizerState,
    hp: &AdamParams,
) -> Result<()> {
    state.check("step_adam_family", param, grad)?;
    let (rows, cols) = param.shape();
    let second = state
        .second_moment
        .get_or_insert_with(|| DenseMatrix::zeros(rows, cols));
    let t = state.step + 1;
    let c1 = 1.0 - hp.beta1.powi(t as i32);
    let c2 = 1.0 - hp.beta2.powi(t as i32);
    let sign_limit = hp.is_sign_limit();

    let mut updates = vec![0.0; rows * cols];
    for (i, ((&p, &gr), (m, v))) in param
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .zip(
            state
                .momentum
                .as_mut_slice()
                .iter_mut()
                .zip(second.as_mut_slice()),
        )
        .enumerate()
    {
        let g = gr + hp.coupled_wd * p;
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / c1;
        updates[i] = if sign_limit {
            if g == 0.0 {
                0.0
            } else {
                m_hat / g.abs()
            }
        } else {
            let denom = (*v / c2).sqrt() + hp.eps;
            if denom == 0.0 {
                return Err(Error::numeric(format!(
                    "adam normalizer is zero at entry {i}; use eps > 0"
                )));
            }
            m_hat / denom
        };
    }
    for (p, u) in param.as_mut_slice().iter_mut().zip(updates) {
        *p = *p - hp.lr * (u + hp.decoupled_wd * *p);
    }
    state.step = t;
    Ok(())
}
