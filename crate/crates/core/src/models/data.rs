//! Seeded synthetic data: separable Gaussian blobs and exact NC configurations.

use super::loss::one_hot;
use crate::error::{Error, Result};
use crate::metrics::{simplex_etf, LabeledFeatures};
use crate::rng;
use crate::tensor::{labels_to_text, parse_labels, DenseMatrix, Svd};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// `D × N`, samples as columns, classes interleaved (`label = n mod K`).
    pub x: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub per_class: usize,
    /// `None` when loaded from disk.
    pub seed: Option<u64>,
}

impl SyntheticDataset {
    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn input_dim(&self) -> usize {
        self.x.rows()
    }

    pub fn one_hot(&self) -> Result<DenseMatrix> {
        one_hot(&self.labels, self.num_classes)
    }

    pub fn labeled_features(&self) -> Result<LabeledFeatures> {
        LabeledFeatures::new(self.x.clone(), self.labels.clone(), self.num_classes)
    }

    /// Matrix text and labels text, in that order.
    pub fn to_text(&self) -> (String, String) {
        (self.x.to_text(), labels_to_text(&self.labels))
    }

    pub fn from_text(matrix: &str, labels: &str) -> Result<Self> {
        let x = DenseMatrix::from_text(matrix)?;
        let labels = parse_labels(labels)?;
        let data = LabeledFeatures::from_labels(x.clone(), labels.clone())?;
        let counts = data.class_counts();
        if !data.is_balanced() {
            return Err(Error::domain("dataset classes are not balanced"));
        }
        Ok(Self {
            x,
            labels,
            num_classes: data.num_classes(),
            per_class: counts[0],
            seed: None,
        })
    }
}

/// Vertices of a regular simplex in `ℝ^{K−1}` padded into `ℝ^D`, with unit
/// distance between any two vertices. Columns are the vertices.
fn simplex_vertices(k: usize, d: usize) -> Result<DenseMatrix> {
    let etf = simplex_etf(k)?;
    let svd = Svd::compute(&etf)?;
    // Uᵀ M* = Σ Vᵀ; the last row belongs to the zero singular value.
    let pairwise = (2.0 / (k - 1) as f64).sqrt();
    Ok(DenseMatrix::from_fn(d, k, |r, c| {
        if r < k - 1 {
            svd.singular_values[r] * svd.v[(c, r)] / pairwise
        } else {
            0.0
        }
    }))
}

/// Balanced blobs around simplex vertices at pairwise distance `4·margin`,
/// with isotropic noise of expected norm about 1.
pub fn make_blob_dataset(
    k: usize,
    d: usize,
    per_class: usize,
    margin: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    make_blob_dataset_with_spread(k, d, per_class, margin, 1.0, seed)
}

/// As [`make_blob_dataset`] with a custom noise scale. Each noise draw has norm
/// below half the center spacing, so the nearest-center rule (and hence a
/// linear classifier) separates the classes exactly.
pub fn make_blob_dataset_with_spread(
    k: usize,
    d: usize,
    per_class: usize,
    margin: f64,
    spread: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    if k < 2 {
        return Err(Error::domain(format!("need K >= 2, got {k}")));
    }
    if d + 1 < k {
        return Err(Error::domain(format!("D = {d} is below K - 1 = {}", k - 1)));
    }
    if !(margin > 0.0) || !(spread >= 0.0) || per_class == 0 {
        return Err(Error::domain("margin must be positive, spread non-negative, per_class >= 1"));
    }
    let spacing = 4.0 * margin;
    let centers = simplex_vertices(k, d)?.scale(spacing);
    let radius = 0.99 * spacing / 2.0;
    let sigma = spread / (d as f64).sqrt();

    let mut r = rng::seeded(seed);
    let n = k * per_class;
    let mut x = DenseMatrix::zeros(d, n);
    let mut noise = vec![0.0; d];
    for col in 0..n {
        let label = col % k;
        let mut accepted = false;
        for _ in 0..1000 {
            for v in noise.iter_mut() {
                *v = sigma * rng::standard_normal(&mut r);
            }
            if noise.iter().map(|v| v * v).sum::<f64>().sqrt() < radius {
                accepted = true;
                break;
            }
        }
        if !accepted {
            let norm = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = 0.5 * radius / norm;
            noise.iter_mut().for_each(|v| *v *= s);
        }
        for (row, v) in noise.iter().enumerate() {
            x[(row, col)] = centers[(row, label)] + v;
        }
    }
    Ok(SyntheticDataset {
        x,
        labels: (0..n).map(|i| i % k).collect(),
        num_classes: k,
        per_class,
        seed: Some(seed),
    })
}

/// A perfectly collapsed configuration.
#[derive(Debug, Clone)]
pub struct NcSolution {
    /// `K × P`.
    pub w: DenseMatrix,
    /// `P × K`, one sample per class.
    pub h: DenseMatrix,
    pub labels: Vec<usize>,
}

/// `H = scale_h·QM*`, `W = scale_w·(QM*)ᵀ` for a random isometry `Q: ℝ^K → ℝ^P`.
pub fn make_nc_solution(
    k: usize,
    p: usize,
    scale_w: f64,
    scale_h: f64,
    isometry_seed: u64,
) -> Result<NcSolution> {
    if p < k {
        return Err(Error::domain(format!("P = {p} must be at least K = {k}")));
    }
    let q = random_isometry(p, k, isometry_seed)?;
    make_nc_solution_with_isometry(&q, scale_w, scale_h)
}

pub fn make_nc_solution_with_isometry(q: &DenseMatrix, scale_w: f64, scale_h: f64) -> Result<NcSolution> {
    let (p, k) = q.shape();
    if p < k {
        return Err(Error::domain(format!("P = {p} must be at least K = {k}")));
    }
    let qm = q.matmul(&simplex_etf(k)?)?;
    Ok(NcSolution {
        w: qm.transpose().scale(scale_w),
        h: qm.scale(scale_h),
        labels: (0..k).collect(),
    })
}

/// `P × K` matrix with orthonormal columns: Gaussian draws, then modified
/// Gram–Schmidt.
pub fn random_isometry(p: usize, k: usize, seed: u64) -> Result<DenseMatrix> {
    if p < k {
        return Err(Error::domain(format!("cannot embed {k} dimensions in {p}")));
    }
    let mut r = rng::seeded(seed);
    let g = rng::gaussian_matrix(p, k, 1.0, &mut r);
    let mut cols: Vec<Vec<f64>> = (0..k).map(|c| g.column(c)).collect();
    for j in 0..k {
        for i in 0..j {
            let proj: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            let qi = cols[i].clone();
            for (v, q) in cols[j].iter_mut().zip(&qi) {
                *v -= proj * q;
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::numeric("degenerate Gaussian draw in isometry"));
        }
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    Ok(DenseMatrix::from_fn(p, k, |r, c| cols[c][r]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertices_are_equidistant() {
        let v = simplex_vertices(5, 6).unwrap();
        for i in 0..5 {
            for j in 0..i {
                let d: f64 = (0..6).map(|r| (v[(r, i)] - v[(r, j)]).powi(2)).sum::<f64>().sqrt();
                assert!((d - 1.0).abs() < 1e-12);
            }
        }
        assert!(v.row(4).iter().chain(v.row(5)).all(|&x| x == 0.0));
    }

    #[test]
    fn blobs_are_deterministic_and_balanced() {
        let a = make_blob_dataset(4, 8, 25, 1.0, 11).unwrap();
        let b = make_blob_dataset(4, 8, 25, 1.0, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x.shape(), (8, 100));
        assert!(a.labeled_features().unwrap().is_balanced());
        assert_ne!(a.x, make_blob_dataset(4, 8, 25, 1.0, 12).unwrap().x);
    }

    #[test]
    fn zero_spread_returns_centers() {
        let a = make_blob_dataset_with_spread(3, 2, 1, 1.0, 0.0, 0).unwrap();
        let c = simplex_vertices(3, 2).unwrap().scale(4.0);
        assert_eq!(a.x, c);
    }

    #[test]
    fn dimension_too_small() {
        assert!(matches!(make_blob_dataset(5, 3, 2, 1.0, 0), Err(Error::Domain(_))));
        assert!(make_blob_dataset(5, 4, 2, 1.0, 0).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let a = make_blob_dataset(3, 4, 2, 1.0, 9).unwrap();
        let (m, l) = a.to_text();
        let b = SyntheticDataset::from_text(&m, &l).unwrap();
        assert_eq!(b.x, a.x);
        assert_eq!(b.labels, a.labels);
        assert_eq!(b.per_class, 2);
    }

    #[test]
    fn isometry_is_orthonormal() {
        let q = random_isometry(7, 4, 3).unwrap();
        let gram = q.transpose().matmul(&q).unwrap();
        assert!(gram.max_abs_diff(&DenseMatrix::identity(4)).unwrap() < 1e-12);
        assert!(random_isometry(3, 4, 0).is_err());
    }

    #[test]
    fn identity_isometry_gives_etf() {
        let s = make_nc_solution_with_isometry(&DenseMatrix::identity(4), 1.0, 1.0).unwrap();
        let etf = simplex_etf(4).unwrap();
        assert_eq!(s.h, etf);
        assert_eq!(s.w, etf.transpose());
        assert!(make_nc_solution(5, 4, 1.0, 1.0, 0).is_err());
    }
}
