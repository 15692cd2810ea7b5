use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Output of [`ce_loss_and_grad`].
#[derive(Debug, Clone)]
pub struct CeOutput {
    pub loss: f64,
    /// `(1/N)(S − Y)Xᵀ`, `K × D`.
    pub grad_w: DenseMatrix,
    /// `(1/N)Wᵀ(S − Y)`, `D × N`.
    pub grad_x: DenseMatrix,
    /// Column-wise softmax of `WX`.
    pub probs: DenseMatrix,
}

/// `K × N` one-hot matrix for `labels`.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<DenseMatrix> {
    if labels.is_empty() {
        return Err(Error::shape("one_hot", "no labels"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::domain(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    Ok(DenseMatrix::from_fn(num_classes, labels.len(), |k, n| {
        if labels[n] == k {
            1.0
        } else {
            0.0
        }
    }))
}

/// Recovers labels from a one-hot matrix, rejecting columns that are not one-hot.
pub fn labels_from_one_hot(y: &DenseMatrix) -> Result<Vec<usize>> {
    (0..y.cols())
        .map(|n| {
            let col = y.column(n);
            let ones: Vec<usize> = (0..col.len()).filter(|&k| col[k] == 1.0).collect();
            if ones.len() == 1 && col.iter().all(|&v| v == 0.0 || v == 1.0) {
                Ok(ones[0])
            } else {
                Err(Error::domain(format!("column {n} is not one-hot")))
            }
        })
        .collect()
}

/// Column-wise softmax with per-column max subtraction.
pub fn softmax_columns(logits: &DenseMatrix) -> Result<DenseMatrix> {
    logits.ensure_finite("softmax")?;
    let (k, n) = logits.shape();
    let mut out = logits.clone();
    for c in 0..n {
        let max = (0..k).map(|r| logits[(r, c)]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for r in 0..k {
            let e = (logits[(r, c)] - max).exp();
            out[(r, c)] = e;
            total += e;
        }
        for r in 0..k {
            out[(r, c)] /= total;
        }
    }
    Ok(out)
}

/// Mean cross-entropy of the linear classifier `W` on features `X`, with
/// gradients in both arguments.
pub fn ce_loss_and_grad(w: &DenseMatrix, x: &DenseMatrix, y: &DenseMatrix) -> Result<CeOutput> {
    let (k, d) = w.shape();
    if x.rows() != d || y.rows() != k || y.cols() != x.cols() {
        return Err(Error::shape(
            "ce_loss_and_grad",
            format!(
                "W {k}x{d}, X {}x{}, Y {}x{}",
                x.rows(),
                x.cols(),
                y.rows(),
                y.cols()
            ),
        ));
    }
    let n = x.cols();
    let logits = w.matmul(x)?;
    if !logits.is_finite() {
        return Err(Error::numeric("non-finite logits"));
    }
    let probs = softmax_columns(&logits)?;

    let mut loss = 0.0;
    for c in 0..n {
        let max = (0..k).map(|r| logits[(r, c)]).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + (0..k).map(|r| (logits[(r, c)] - max).exp()).sum::<f64>().ln();
        let target: f64 = (0..k).map(|r| y[(r, c)] * logits[(r, c)]).sum();
        loss += lse - target;
    }
    let inv_n = 1.0 / n as f64;
    let residual = probs.sub(y)?.scale(inv_n);
    let grad_w = residual.matmul(&x.transpose())?;
    let grad_x = w.transpose().matmul(&residual)?;
    Ok(CeOutput {
        loss: loss * inv_n,
        grad_w,
        grad_x,
        probs,
    })
}

/// Index of the largest entry in each column, ties to the lowest index.
pub fn argmax_columns(m: &DenseMatrix) -> Vec<usize> {
    (0..m.cols())
        .map(|c| {
            let mut best = 0;
            for r in 1..m.rows() {
                if m[(r, c)] > m[(best, c)] {
                    best = r;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(logits: &DenseMatrix, labels: &[usize]) -> f64 {
    let hits = argmax_columns(logits)
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_log_k() {
        let y = one_hot(&(0..10).collect::<Vec<_>>(), 10).unwrap();
        let out = ce_loss_and_grad(&DenseMatrix::zeros(10, 3), &DenseMatrix::ones(3, 10), &y).unwrap();
        assert!((out.loss - 10f64.ln()).abs() < 1e-15);
        assert!((out.loss - std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn two_class_hand_gradient() {
        let y = one_hot(&[0], 2).unwrap();
        let x = DenseMatrix::filled(1, 1, 1.0);
        let out = ce_loss_and_grad(&DenseMatrix::zeros(2, 1), &x, &y).unwrap();
        assert_eq!(out.grad_w, DenseMatrix::from_rows(&[&[-0.5], &[0.5]]).unwrap());
        assert_eq!(out.grad_w.column_ones_product()[(0, 0)], 0.0);
    }

    #[test]
    fn large_logits_stay_finite() {
        let w = DenseMatrix::from_rows(&[&[800.0], &[-800.0]]).unwrap();
        let y = one_hot(&[1], 2).unwrap();
        let out = ce_loss_and_grad(&w, &DenseMatrix::ones(1, 1), &y).unwrap();
        assert!((out.loss - 1600.0).abs() < 1e-9);
        assert!(out.grad_w.is_finite());
    }

    #[test]
    fn non_finite_is_numeric_error() {
        let w = DenseMatrix::filled(2, 1, f64::INFINITY);
        let y = one_hot(&[1], 2).unwrap();
        assert!(matches!(
            ce_loss_and_grad(&w, &DenseMatrix::ones(1, 1), &y),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn shape_checks() {
        let y = one_hot(&[0, 1], 2).unwrap();
        assert!(matches!(
            ce_loss_and_grad(&DenseMatrix::zeros(2, 3), &DenseMatrix::zeros(2, 2), &y),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn one_hot_round_trip() {
        let y = one_hot(&[2, 0, 1], 3).unwrap();
        assert_eq!(labels_from_one_hot(&y).unwrap(), vec![2, 0, 1]);
        assert!(labels_from_one_hot(&DenseMatrix::ones(2, 1)).is_err());
        assert!(one_hot(&[3], 3).is_err());
    }

    #[test]
    fn accuracy_counts_argmax() {
        let logits = DenseMatrix::from_rows(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, 2.0]]).unwrap();
        assert!((accuracy(&logits, &[0, 1, 1]) - 2.0 / 3.0).abs() < 1e-15);
    }
}
