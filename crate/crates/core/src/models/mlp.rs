//! A ReLU multilayer perceptron `f(x) = W·h_θ(x)` with a bias-free classifier.

use super::loss::{ce_loss_and_grad, CeOutput};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::DenseMatrix;

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// `out × in`.
    pub w: DenseMatrix,
    /// `out × 1`.
    pub b: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub hidden: Vec<DenseLayer>,
    /// Final classifier, `K × P`.
    pub last: DenseMatrix,
}

/// Loss, gradients in [`MlpModel::params`] order, and the penultimate features.
#[derive(Debug, Clone)]
pub struct MlpOutput {
    pub loss: f64,
    pub grads: Vec<DenseMatrix>,
    /// `h_θ(X)`, `P × N`.
    pub features: DenseMatrix,
    pub logits: DenseMatrix,
}

impl MlpModel {
    /// Gaussian(0, 0.1²) weights, zero biases. With no hidden layers the
    /// features are the inputs themselves.
    pub fn new(input_dim: usize, hidden_sizes: &[usize], num_classes: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || num_classes < 2 || hidden_sizes.contains(&0) {
            return Err(Error::domain(
                "MLP needs positive layer widths and at least two classes",
            ));
        }
        let mut r = rng::seeded(seed);
        let mut fan_in = input_dim;
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        for &width in hidden_sizes {
            hidden.push(DenseLayer {
                w: rng::gaussian_matrix(width, fan_in, super::INIT_STD, &mut r),
                b: DenseMatrix::zeros(width, 1),
            });
            fan_in = width;
        }
        let last = rng::gaussian_matrix(num_classes, fan_in, super::INIT_STD, &mut r);
        Ok(Self { hidden, last })
    }

    pub fn from_layers(hidden: Vec<DenseLayer>, last: DenseMatrix) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for (i, l) in hidden.iter().enumerate() {
            if l.b.shape() != (l.w.rows(), 1) || prev.is_some_and(|p| p != l.w.cols()) {
                return Err(Error::shape("MlpModel", format!("layer {i} does not chain")));
            }
            prev = Some(l.w.rows());
        }
        if prev.is_some_and(|p| p != last.cols()) {
            return Err(Error::shape("MlpModel", "classifier does not match last hidden width"));
        }
        Ok(Self { hidden, last })
    }

    pub fn num_classes(&self) -> usize {
        self.last.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.last.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.first().map_or(self.last.cols(), |l| l.w.cols())
    }

    /// Order: `w₁, b₁, …, w_L, b_L, W`.
    pub fn params(&self) -> Vec<&DenseMatrix> {
        let mut out: Vec<&DenseMatrix> = Vec::with_capacity(2 * self.hidden.len() + 1);
        for l in &self.hidden {
            out.push(&l.w);
            out.push(&l.b);
        }
        out.push(&self.last);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out: Vec<&mut DenseMatrix> = Vec::with_capacity(2 * self.hidden.len() + 1);
        for l in &mut self.hidden {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out.push(&mut self.last);
        out
    }

    fn check_input(&self, x: &DenseMatrix) -> Result<()> {
        if x.rows() != self.input_dim() {
            return Err(Error::shape(
                "MlpModel",
                format!("input has {} rows, model expects {}", x.rows(), self.input_dim()),
            ));
        }
        Ok(())
    }

    /// Pre-activations of every hidden layer and the final features.
    fn forward_cached(&self, x: &DenseMatrix) -> Result<(Vec<DenseMatrix>, DenseMatrix)> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut a = x.clone();
        for l in &self.hidden {
            let mut z = l.w.matmul(&a)?;
            for r in 0..z.rows() {
                let bias = l.b[(r, 0)];
                for c in 0..z.cols() {
                    z[(r, c)] += bias;
                }
            }
            a = z.map(|v| v.max(0.0));
            pre.push(z);
        }
        if !a.is_finite() {
            return Err(Error::numeric("non-finite activations"));
        }
        Ok((pre, a))
    }

    pub fn features(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.forward_cached(x)?.1)
    }

    pub fn logits(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.last.matmul(&self.features(x)?)
    }

    pub fn forward_backward(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<MlpOutput> {
        let (pre, features) = self.forward_cached(x)?;
        let CeOutput {
            loss,
            grad_w,
            grad_x,
            ..
        } = ce_loss_and_grad(&self.last, &features, y)?;

        let mut grads = vec![grad_w];
        let mut upstream = grad_x;
        for (i, l) in self.hidden.iter().enumerate().rev() {
            let dz = upstream.zip_map(&pre[i], |g, z| if z > 0.0 { g } else { 0.0 })?;
            let input = if i == 0 {
                x.clone()
            } else {
                pre[i - 1].map(|v| v.max(0.0))
            };
            let gb = DenseMatrix::from_fn(dz.rows(), 1, |r, _| dz.row(r).iter().sum());
            let gw = dz.matmul(&input.transpose())?;
            upstream = l.w.transpose().matmul(&dz)?;
            grads.push(gb);
            grads.push(gw);
        }
        grads.reverse();
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("non-finite gradient"));
        }
        let logits = self.last.matmul(&features)?;
        Ok(MlpOutput {
            loss,
            grads,
            features,
            logits,
        })
    }
}
