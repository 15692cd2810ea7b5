//! The unconstrained feature model: features `H` are free parameters (or
//! frozen), and the classifier is a bias-free linear layer `W`.

use super::loss::{ce_loss_and_grad, labels_from_one_hot, one_hot};
use crate::error::{Error, Result};
use crate::metrics::simplex_etf;
use crate::rng;
use crate::tensor::DenseMatrix;

#[derive(Debug, Clone)]
pub struct UfmModel {
    /// `K × P`.
    pub w: DenseMatrix,
    /// `P × N`.
    pub h: DenseMatrix,
    /// One-hot, `K × N`.
    pub y: DenseMatrix,
    pub feature_trainable: bool,
    labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct UfmGrads {
    pub loss: f64,
    pub grad_w: DenseMatrix,
    /// Present only when the features are trainable.
    pub grad_h: Option<DenseMatrix>,
}

impl UfmModel {
    pub fn new(w: DenseMatrix, h: DenseMatrix, y: DenseMatrix, feature_trainable: bool) -> Result<Self> {
        if w.cols() != h.rows() || w.rows() != y.rows() || h.cols() != y.cols() {
            return Err(Error::shape(
                "UfmModel::new",
                format!(
                    "W {}x{}, H {}x{}, Y {}x{}",
                    w.rows(),
                    w.cols(),
                    h.rows(),
                    h.cols(),
                    y.rows(),
                    y.cols()
                ),
            ));
        }
        let labels = labels_from_one_hot(&y)?;
        Ok(Self {
            w,
            h,
            y,
            feature_trainable,
            labels,
        })
    }

    /// `P = N = K`, one sample per class, `H = M*` frozen and `W₀ = 0`.
    pub fn theorem_setting(k: usize) -> Result<Self> {
        let h = simplex_etf(k)?;
        let y = DenseMatrix::identity(k);
        Self::new(DenseMatrix::zeros(k, k), h, y, false)
    }

    /// Gaussian(0, 0.1²) `W` and `H`, `per_class` samples per class, interleaved.
    pub fn random(k: usize, p: usize, per_class: usize, seed: u64) -> Result<Self> {
        if k < 2 || p == 0 || per_class == 0 {
            return Err(Error::domain("need K >= 2, P >= 1, per_class >= 1"));
        }
        let mut r = rng::seeded(seed);
        let w = rng::gaussian_matrix(k, p, super::INIT_STD, &mut r);
        let h = rng::gaussian_matrix(p, k * per_class, super::INIT_STD, &mut r);
        let labels: Vec<usize> = (0..k * per_class).map(|i| i % k).collect();
        Self::new(w, h, one_hot(&labels, k)?, true)
    }

    pub fn num_classes(&self) -> usize {
        self.w.rows()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn logits(&self) -> Result<DenseMatrix> {
        self.w.matmul(&self.h)
    }

    /// Pure cross-entropy; regularization is left to the optimizer's weight decay.
    pub fn loss_and_grads(&self) -> Result<UfmGrads> {
        self.loss_and_grads_on(&(0..self.h.cols()).collect::<Vec<_>>())
    }

    /// Loss and gradients on a subset of samples. `grad_h` is full-size with
    /// zeros outside `batch`.
    pub fn loss_and_grads_on(&self, batch: &[usize]) -> Result<UfmGrads> {
        let full = batch.len() == self.h.cols() && batch.iter().enumerate().all(|(i, &b)| i == b);
        let out = if full {
            ce_loss_and_grad(&self.w, &self.h, &self.y)?
        } else {
            let hb = self.h.select_columns(batch)?;
            let yb = self.y.select_columns(batch)?;
            ce_loss_and_grad(&self.w, &hb, &yb)?
        };
        let grad_h = self.feature_trainable.then(|| {
            if full {
                out.grad_x.clone()
            } else {
                let mut g = DenseMatrix::zeros(self.h.rows(), self.h.cols());
                for (j, &col) in batch.iter().enumerate() {
                    for r in 0..g.rows() {
                        g[(r, col)] = out.grad_x[(r, j)];
                    }
                }
                g
            }
        });
        Ok(UfmGrads {
            loss: out.loss,
            grad_w: out.grad_w,
            grad_h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::sign;

    #[test]
    fn zero_model_loss_is_log_k() {
        let mut m = UfmModel::theorem_setting(5).unwrap();
        m.h = DenseMatrix::zeros(5, 5);
        assert!((m.loss_and_grads().unwrap().loss - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn signed_gradient_at_origin() {
        for k in [3, 4, 10] {
            let m = UfmModel::theorem_setting(k).unwrap();
            let g = m.loss_and_grads().unwrap();
            assert!(g.grad_h.is_none());
            let signs = g.grad_w.map(sign);
            let expected = DenseMatrix::from_fn(k, k, |i, j| if i == j { -1.0 } else { 1.0 });
            assert_eq!(signs, expected, "K={k}");
        }
    }

    #[test]
    fn minibatch_gradient_scatter() {
        let m = UfmModel::random(3, 4, 2, 5).unwrap();
        let g = m.loss_and_grads_on(&[4, 1]).unwrap();
        let gh = g.grad_h.unwrap();
        for c in [0, 2, 3, 5] {
            assert!(gh.column(c).iter().all(|&v| v == 0.0));
        }
        assert!(gh.column(4).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let y = DenseMatrix::identity(3);
        assert!(UfmModel::new(DenseMatrix::zeros(3, 2), DenseMatrix::zeros(3, 3), y, true).is_err());
    }
}
