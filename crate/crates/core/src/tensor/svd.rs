//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! The sweep order is fixed (cyclic by column pairs) so the decomposition is
//! bit-for-bit reproducible for a given input.

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Singular values at or below this fraction of the largest are treated as zero.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;
const ORTHOGONALITY_TOL: f64 = 1e-15;

/// `a = u · diag(singular_values) · vᵀ` with `u: m×r`, `v: n×r`, `r = min(m, n)`.
///
/// Columns of `u` that belong to zero singular values are left as zeros.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn compute(a: &DenseMatrix) -> Result<Self> {
        a.ensure_finite("svd")?;
        if a.rows() >= a.cols() {
            Ok(jacobi_tall(a))
        } else {
            let t = jacobi_tall(&a.transpose());
            Ok(Svd {
                u: t.v,
                singular_values: t.singular_values,
                v: t.u,
            })
        }
    }

    /// Number of singular values above `rank_tolerance × σ_max`.
    pub fn rank(&self, rank_tolerance: f64) -> usize {
        let cutoff = rank_tolerance * self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > cutoff && s > 0.0)
            .count()
    }
}

fn jacobi_tall(a: &DenseMatrix) -> Svd {
    let (m, n) = a.shape();
    // Column-major working copies.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= ORTHOGONALITY_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ties in column order.
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = DenseMatrix::zeros(m, n);
    let mut vm = DenseMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        singular_values.push(sigma);
        if sigma > 0.0 {
            for i in 0..m {
                u[(i, k)] = cols[j][i] / sigma;
            }
        }
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
    }
    Svd {
        u,
        singular_values,
        v: vm,
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Singular values in non-increasing order; `min(rows, cols)` of them.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(Svd::compute(a)?.singular_values)
}

/// Moore–Penrose pseudo-inverse, dropping singular values `σ ≤ rank_tolerance · σ_max`.
pub fn pseudo_inverse(a: &DenseMatrix, rank_tolerance: f64) -> Result<DenseMatrix> {
    if !(rank_tolerance >= 0.0) {
        return Err(Error::domain(format!(
            "rank_tolerance must be non-negative, got {rank_tolerance}"
        )));
    }
    let svd = Svd::compute(a)?;
    let (m, n) = a.shape();
    let cutoff = rank_tolerance * svd.singular_values.first().copied().unwrap_or(0.0);
    let mut out = DenseMatrix::zeros(n, m);
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= cutoff || sigma == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = svd.v[(i, k)] / sigma;
            if vik == 0.0 {
                continue;
            }
            for j in 0..m {
                out[(i, j)] += vik * svd.u[(j, k)];
            }
        }
    }
    Ok(out)
}
