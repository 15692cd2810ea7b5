//! Neural-collapse metrics NC0–NC4 and their weight/product variants.
//!
//! Conventions: the last-layer weight `W` is `K × p` (one row per class),
//! features are stored column-wise as a `p × N` matrix, and `M` is the
//! `p × K` matrix of centered class means.
//!
//! The within-class covariance is averaged once over all `N` samples,
//! `Σ_W = (1/N) Σ_n (h_n − μ_{y_n})(h_n − μ_{y_n})ᵀ`. Reading the normalization
//! as an extra `1/K` (or a per-class `N`) only rescales NC1 by a constant.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{pseudo_inverse, DenseMatrix, DEFAULT_RANK_TOLERANCE};

/// Vectors shorter than this are treated as zero by the angle metrics.
pub const MIN_NORM: f64 = 1e-12;

/// Column-wise features with their class labels.
#[derive(Debug, Clone)]
pub struct LabeledFeatures {
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledFeatures {
    pub fn new(features: DenseMatrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != features.cols() {
            return Err(Error::shape(
                "LabeledFeatures",
                format!(
                    "{} labels for {} feature columns",
                    labels.len(),
                    features.cols()
                ),
            ));
        }
        if num_classes == 0 {
            return Err(Error::domain("num_classes must be positive"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::domain(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let data = Self {
            features,
            labels,
            num_classes,
        };
        if let Some(empty) = data.class_counts().iter().position(|&c| c == 0) {
            return Err(Error::domain(format!("class {empty} has no samples")));
        }
        Ok(data)
    }

    /// Infers `K` as one more than the largest label.
    pub fn from_labels(features: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(features, labels, k)
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.rows()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn is_balanced(&self) -> bool {
        let counts = self.class_counts();
        counts.iter().all(|&c| c == counts[0])
    }
}

#[derive(Debug, Clone)]
pub struct ClassStatistics {
    /// `μ_k` as columns, `p × K`.
    pub class_means: DenseMatrix,
    /// Mean of the class means, `p × 1`.
    pub global_mean: DenseMatrix,
    /// `M = (μ_k − μ_G)_k`, `p × K`.
    pub centered_means: DenseMatrix,
    pub sigma_b: DenseMatrix,
    pub sigma_w: DenseMatrix,
    pub per_class_counts: Vec<usize>,
}

impl ClassStatistics {
    pub fn num_classes(&self) -> usize {
        self.class_means.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.class_means.rows()
    }
}

pub fn compute_class_statistics(data: &LabeledFeatures) -> Result<ClassStatistics> {
    let h = data.features();
    let (p, n) = h.shape();
    let k = data.num_classes();
    let counts = data.class_counts();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::domain(format!("class {empty} has no samples")));
    }

    let mut means = DenseMatrix::zeros(p, k);
    for (col, &label) in data.labels().iter().enumerate() {
        for r in 0..p {
            means[(r, label)] += h[(r, col)];
        }
    }
    for c in 0..k {
        for r in 0..p {
            means[(r, c)] /= counts[c] as f64;
        }
    }

    let global =
        DenseMatrix::from_fn(p, 1, |r, _| means.row(r).iter().sum::<f64>() / k as f64);
    let centered = DenseMatrix::from_fn(p, k, |r, c| means[(r, c)] - global[(r, 0)]);

    let sigma_b = centered
        .matmul(&centered.transpose())?
        .scale(1.0 / k as f64);

    let mut sigma_w = DenseMatrix::zeros(p, p);
    let mut diff = vec![0.0; p];
    for (col, &label) in data.labels().iter().enumerate() {
        for (r, d) in diff.iter_mut().enumerate() {
            *d = h[(r, col)] - means[(r, label)];
        }
        for i in 0..p {
            for j in 0..p {
                sigma_w[(i, j)] += diff[i] * diff[j];
            }
        }
    }
    let sigma_w = sigma_w.scale(1.0 / n as f64);

    Ok(ClassStatistics {
        class_means: means,
        global_mean: global,
        centered_means: centered,
        sigma_b,
        sigma_w,
        per_class_counts: counts,
    })
}

/// The standard simplex ETF `M* = (I − J/K)/√(K−1)`.
#[derive(Debug, Clone)]
pub struct SimplexEtf {
    pub k: usize,
    pub matrix: DenseMatrix,
}

impl SimplexEtf {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("simplex ETF needs K >= 2, got {k}")));
        }
        let scale = 1.0 / ((k - 1) as f64).sqrt();
        let kf = k as f64;
        let matrix = DenseMatrix::from_fn(k, k, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            scale * (delta - 1.0 / kf)
        });
        Ok(Self { k, matrix })
    }
}

/// Convenience wrapper returning just the `K × K` matrix `M*`.
pub fn simplex_etf(k: usize) -> Result<DenseMatrix> {
    Ok(SimplexEtf::new(k)?.matrix)
}

/// `NC0 = (1/p)·‖Wᵀ𝟙‖₂`.
pub fn nc0_metric(w: &DenseMatrix) -> f64 {
    w.column_ones_product().frobenius_norm() / w.cols() as f64
}

/// `α = (1/K)·‖Wᵀ𝟙‖₂²`, the quantity tracked by the NC0 dynamics.
pub fn nc0_alpha(w: &DenseMatrix) -> f64 {
    let m = w.column_ones_product();
    m.frobenius_inner(&m).expect("same matrix") / w.rows() as f64
}

pub fn nc0_normalized(w: &DenseMatrix) -> Result<f64> {
    let norm = w.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::domain("nc0_normalized of a zero matrix"));
    }
    Ok(nc0_metric(w) / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nc1 {
    pub value: f64,
    /// `Σ_B` was identically zero, so the value is a placeholder 0.
    pub degenerate: bool,
}

/// `NC1 = (1/K)·Tr[Σ_W Σ_B†]`.
pub fn nc1(stats: &ClassStatistics) -> Result<Nc1> {
    let k = stats.num_classes() as f64;
    if stats.sigma_b.max_abs() == 0.0 {
        return Ok(Nc1 {
            value: 0.0,
            degenerate: true,
        });
    }
    let pinv = pseudo_inverse(&stats.sigma_b, DEFAULT_RANK_TOLERANCE)?;
    Ok(Nc1 {
        value: stats.sigma_w.matmul(&pinv)?.trace()? / k,
        degenerate: false,
    })
}

/// `(1/K²)·‖G/‖G‖_F − M*‖_F` for a `K × K` Gram-like matrix `G`.
fn etf_deviation(gram: &DenseMatrix, what: &str) -> Result<f64> {
    let k = gram.rows();
    if !gram.is_square() {
        return Err(Error::shape(
            "etf_deviation",
            format!("{what} must be square, got {}x{}", gram.rows(), gram.cols()),
        ));
    }
    let norm = gram.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::domain(format!("{what} is zero")));
    }
    let etf = simplex_etf(k)?;
    let dev = gram.scale(1.0 / norm).sub(&etf)?.frobenius_norm();
    Ok(dev / (k * k) as f64)
}

/// `std/avg` of the vector norms (population standard deviation).
fn equinormality(vectors: &[Vec<f64>], what: &str) -> Result<f64> {
    let norms: Vec<f64> = vectors.iter().map(|v| l2(v)).collect();
    let n = norms.len() as f64;
    let avg = norms.iter().sum::<f64>() / n;
    if avg == 0.0 {
        return Err(Error::domain(format!("{what}: all norms are zero")));
    }
    let var = norms.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / avg)
}

/// Average over ordered pairs `k ≠ k′` of `|cos(v_k, v_k′) + 1/(K−1)|`.
fn equiangularity(vectors: &[Vec<f64>], what: &str) -> Result<f64> {
    let k = vectors.len();
    if k < 2 {
        return Err(Error::domain(format!("{what}: need at least two vectors")));
    }
    let norms: Vec<f64> = vectors.iter().map(|v| l2(v)).collect();
    if let Some(i) = norms.iter().position(|&n| n < MIN_NORM) {
        return Err(Error::domain(format!("{what}: vector {i} has zero norm")));
    }
    let shift = 1.0 / (k - 1) as f64;
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let cos = dot(&vectors[i], &vectors[j]) / (norms[i] * norms[j]);
                total += (cos + shift).abs();
            }
        }
    }
    Ok(total / (k * (k - 1)) as f64)
}

fn columns(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|c| m.column(c)).collect()
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `NC2 = (1/K²)·‖MᵀM/‖MᵀM‖_F − M*‖_F`.
pub fn nc2(stats: &ClassStatistics) -> Result<f64> {
    let m = &stats.centered_means;
    etf_deviation(&m.transpose().matmul(m)?, "MᵀM")
}

pub fn nc2_n(stats: &ClassStatistics) -> Result<f64> {
    equinormality(&columns(&stats.centered_means), "centered means")
}

pub fn nc2_a(stats: &ClassStatistics) -> Result<f64> {
    equiangularity(&columns(&stats.centered_means), "centered means")
}

/// Equiangularity of the columns of an arbitrary `p × K` matrix.
pub fn nc2_a_of(m: &DenseMatrix) -> Result<f64> {
    equiangularity(&columns(m), "columns")
}

pub fn nc2w(w: &DenseMatrix) -> Result<f64> {
    etf_deviation(&w.matmul(&w.transpose())?, "WWᵀ")
}

pub fn nc2w_n(w: &DenseMatrix) -> Result<f64> {
    equinormality(&rows(w), "weight rows")
}

pub fn nc2w_a(w: &DenseMatrix) -> Result<f64> {
    equiangularity(&rows(w), "weight rows")
}

/// `NC2M = (1/K²)·‖WM/‖WM‖_F − M*‖_F`.
pub fn nc2m(w: &DenseMatrix, stats: &ClassStatistics) -> Result<f64> {
    etf_deviation(&w.matmul(&stats.centered_means)?, "WM")
}

/// `NC3 = (1/(Kp))·‖W/‖W‖_F − Mᵀ/‖M‖_F‖_F`.
pub fn nc3(w: &DenseMatrix, stats: &ClassStatistics) -> Result<f64> {
    let mt = stats.centered_means.transpose();
    if w.shape() != mt.shape() {
        return Err(Error::shape(
            "nc3",
            format!(
                "W is {}x{} but Mᵀ is {}x{}",
                w.rows(),
                w.cols(),
                mt.rows(),
                mt.cols()
            ),
        ));
    }
    let (wn, mn) = (w.frobenius_norm(), mt.frobenius_norm());
    if wn == 0.0 || mn == 0.0 {
        return Err(Error::domain("nc3 needs non-zero W and M"));
    }
    let dev = w.scale(1.0 / wn).sub(&mt.scale(1.0 / mn))?.frobenius_norm();
    Ok(dev / (w.rows() * w.cols()) as f64)
}

/// Index of the first maximum.
fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Index of the first minimum.
fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    argmax(values.into_iter().map(|v| -v))
}

/// Fraction of test features on which the linear classifier `argmax_k ⟨w_k, h⟩`
/// agrees with the nearest (uncentered) class mean.
pub fn nc4(w: &DenseMatrix, stats: &ClassStatistics, test: &DenseMatrix) -> Result<f64> {
    let (k, p) = (stats.num_classes(), stats.feature_dim());
    if w.shape() != (k, p) || test.rows() != p {
        return Err(Error::shape(
            "nc4",
            format!(
                "W {}x{}, test {}x{}, means {p}x{k}",
                w.rows(),
                w.cols(),
                test.rows(),
                test.cols()
            ),
        ));
    }
    let means = columns(&stats.class_means);
    let mut agree = 0usize;
    for n in 0..test.cols() {
        let h = test.column(n);
        let linear = argmax((0..k).map(|c| dot(w.row(c), &h)));
        let nearest = argmin(means.iter().map(|mu| {
            mu.iter()
                .zip(&h)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        }));
        if linear == nearest {
            agree += 1;
        }
    }
    Ok(agree as f64 / test.cols() as f64)
}

/// Column order used for metric CSV output and JSON keys.
pub const METRIC_NAMES: [&str; 13] = [
    "nc0",
    "nc0_alpha",
    "nc0_normalized",
    "nc1",
    "nc2",
    "nc2n",
    "nc2a",
    "nc2w",
    "nc2wn",
    "nc2wa",
    "nc2m",
    "nc3",
    "nc4",
];

/// Every metric at once. `None` marks a value skipped because its inputs were
/// degenerate (zero norms and the like).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricSuite {
    pub nc0: Option<f64>,
    pub nc0_alpha: Option<f64>,
    pub nc0_normalized: Option<f64>,
    pub nc1: Option<f64>,
    pub nc2: Option<f64>,
    pub nc2n: Option<f64>,
    pub nc2a: Option<f64>,
    pub nc2w: Option<f64>,
    pub nc2wn: Option<f64>,
    pub nc2wa: Option<f64>,
    pub nc2m: Option<f64>,
    pub nc3: Option<f64>,
    pub nc4: Option<f64>,
    pub nc1_degenerate: bool,
}

fn skip_domain(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl MetricSuite {
    /// NC4 is evaluated on `test` when given, otherwise on the training features.
    pub fn compute(
        w: &DenseMatrix,
        train: &LabeledFeatures,
        test: Option<&DenseMatrix>,
    ) -> Result<Self> {
        let stats = compute_class_statistics(train)?;
        Self::from_statistics(w, &stats, test.unwrap_or(train.features()))
    }

    pub fn from_statistics(
        w: &DenseMatrix,
        stats: &ClassStatistics,
        test: &DenseMatrix,
    ) -> Result<Self> {
        if w.rows() != stats.num_classes() || w.cols() != stats.feature_dim() {
            return Err(Error::shape(
                "MetricSuite",
                format!(
                    "W is {}x{} but features give K={}, p={}",
                    w.rows(),
                    w.cols(),
                    stats.num_classes(),
                    stats.feature_dim()
                ),
            ));
        }
        let nc1 = nc1(stats)?;
        Ok(Self {
            nc0: Some(nc0_metric(w)),
            nc0_alpha: Some(nc0_alpha(w)),
            nc0_normalized: skip_domain(nc0_normalized(w))?,
            nc1: Some(nc1.value),
            nc2: skip_domain(nc2(stats))?,
            nc2n: skip_domain(nc2_n(stats))?,
            nc2a: skip_domain(nc2_a(stats))?,
            nc2w: skip_domain(nc2w(w))?,
            nc2wn: skip_domain(nc2w_n(w))?,
            nc2wa: skip_domain(nc2w_a(w))?,
            nc2m: skip_domain(nc2m(w, stats))?,
            nc3: skip_domain(nc3(w, stats))?,
            nc4: Some(nc4(w, stats, test)?),
            nc1_degenerate: nc1.degenerate,
        })
    }

    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 13] {
        [
            self.nc0,
            self.nc0_alpha,
            self.nc0_normalized,
            self.nc1,
            self.nc2,
            self.nc2n,
            self.nc2a,
            self.nc2w,
            self.nc2wn,
            self.nc2wa,
            self.nc2m,
            self.nc3,
            self.nc4,
        ]
    }

    pub fn from_values(values: [Option<f64>; 13]) -> Self {
        let [nc0, nc0_alpha, nc0_normalized, nc1, nc2, nc2n, nc2a, nc2w, nc2wn, nc2wa, nc2m, nc3, nc4] =
            values;
        Self {
            nc0,
            nc0_alpha,
            nc0_normalized,
            nc1,
            nc2,
            nc2n,
            nc2a,
            nc2w,
            nc2wn,
            nc2wa,
            nc2m,
            nc3,
            nc4,
            nc1_degenerate: false,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_NAMES
            .iter()
            .position(|&n| n == name)
            .and_then(|i| self.values()[i])
    }
}
