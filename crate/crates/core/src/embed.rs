//! Embedding-space fidelity and adherence metrics.
//!
//! All inputs are externally produced embeddings. Joint metrics concatenate a
//! series embedding with its condition embedding row by row and reuse the
//! plain metrics on the result.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::EmbeddingMatrix;

pub const DEFAULT_K: usize = 5;

/// Eigenvalues below this fraction of the largest are treated as zero.
const EIGEN_CLAMP: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;

/// Empirical mean and `n − 1` covariance of embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn gaussian_summary(e: &EmbeddingMatrix) -> Result<GaussianSummary> {
    let n = e.n_samples();
    if n < 2 {
        return Err(Error::invalid(format!("gaussian summary needs at least 2 rows, got {n}")));
    }
    let d = e.dim();
    let mut mean = DVector::zeros(d);
    for row in e.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in e.rows() {
        for (c, (v, m)) in centered.iter_mut().zip(row.iter().zip(mean.iter())) {
            *c = v - m;
        }
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(GaussianSummary { mean, covariance: cov })
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::shape("matrix is not square"));
    }
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let asym = (0..m.nrows())
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (m[(i, j)] - m[(j, i)]).abs())
        .fold(0.0, f64::max);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::invalid(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn clamped_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let mut eig = SymmetricEigen::new(symmetrized(m));
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let floor = EIGEN_CLAMP * top;
    for v in eig.eigenvalues.iter_mut() {
        if *v < floor {
            *v = 0.0;
        }
    }
    eig
}

/// Principal square root of a symmetric PSD matrix via its spectral
/// decomposition; small and negative eigenvalues are clamped to zero.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    let eig = clamped_eigen(m);
    let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let v = &eig.eigenvectors;
    Ok(symmetrized(&(v * roots * v.transpose())))
}

/// `Tr((Σ_A Σ_B)^{1/2})`, computed as `Tr((Σ_A^{1/2} Σ_B Σ_A^{1/2})^{1/2})`.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let sa = matrix_sqrt_psd(a)?;
    check_symmetric(b)?;
    let inner = &sa * b * &sa;
    Ok(clamped_eigen(&inner).eigenvalues.iter().map(|v| v.sqrt()).sum())
}

/// Fréchet (2-Wasserstein) distance between two Gaussian summaries.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    let mean_gap = (&a.mean - &b.mean).norm_squared();
    let cross = trace_sqrt_product(&a.covariance, &b.covariance)?;
    let d = mean_gap + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

/// Fréchet distance between the Gaussian fits of two embedding sets.
pub fn fid(real: &EmbeddingMatrix, gen: &EmbeddingMatrix) -> Result<f64> {
    frechet_distance(&gaussian_summary(real)?, &gaussian_summary(gen)?)
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Points with per-point radius equal to the distance to their `k`-th nearest
/// neighbour among the other points.
#[derive(Debug, Clone)]
pub struct ManifoldIndex {
    points: EmbeddingMatrix,
    k: usize,
    radii: Vec<f64>,
}

impl ManifoldIndex {
    pub fn build(points: &EmbeddingMatrix, k: usize) -> Result<Self> {
        let n = points.n_samples();
        if k == 0 || k >= n {
            return Err(Error::invalid(format!("k must satisfy 1 <= k < n (k={k}, n={n})")));
        }
        let radii = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = points.row(i);
                let mut dists: Vec<f64> =
                    (0..n).filter(|&j| j != i).map(|j| euclidean(p, points.row(j))).collect();
                let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
                *kth
            })
            .collect();
        Ok(Self { points: points.clone(), k, radii })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Closed-ball membership in the union of all hyperspheres.
    pub fn contains(&self, q: &[f64]) -> bool {
        self.points
            .rows()
            .zip(&self.radii)
            .any(|(p, &r)| euclidean(q, p) <= r)
    }

    fn coverage(&self, queries: &EmbeddingMatrix) -> Result<f64> {
        if queries.dim() != self.dim() {
            return Err(Error::shape(format!("query dim {} vs index dim {}", queries.dim(), self.dim())));
        }
        if queries.n_samples() == 0 {
            return Err(Error::invalid("no query points"));
        }
        let hits: Vec<bool> = (0..queries.n_samples())
            .into_par_iter()
            .map(|i| self.contains(queries.row(i)))
            .collect();
        Ok(hits.iter().filter(|&&h| h).count() as f64 / queries.n_samples() as f64)
    }
}

pub fn manifold_contains(q: &[f64], index: &ManifoldIndex) -> bool {
    index.contains(q)
}

fn check_sizes(real: &EmbeddingMatrix, gen: &EmbeddingMatrix, k: usize) -> Result<()> {
    if real.n_samples() <= k || gen.n_samples() <= k {
        return Err(Error::invalid(format!(
            "both sets need more than k={k} points (real {}, generated {})",
            real.n_samples(),
            gen.n_samples()
        )));
    }
    Ok(())
}

/// Fraction of generated points inside the real manifold.
pub fn precision(real: &EmbeddingMatrix, gen: &EmbeddingMatrix, k: usize) -> Result<f64> {
    check_sizes(real, gen, k)?;
    ManifoldIndex::build(real, k)?.coverage(gen)
}

/// Fraction of real points inside the generated manifold.
pub fn recall(real: &EmbeddingMatrix, gen: &EmbeddingMatrix, k: usize) -> Result<f64> {
    check_sizes(real, gen, k)?;
    ManifoldIndex::build(gen, k)?.coverage(real)
}

/// Mean row-wise cosine similarity between series and text embeddings.
pub fn cttp_score(ts: &EmbeddingMatrix, text: &EmbeddingMatrix) -> Result<f64> {
    if ts.n_samples() != text.n_samples() || ts.dim() != text.dim() {
        return Err(Error::shape(format!(
            "series ({}, {}) vs text ({}, {})",
            ts.n_samples(),
            ts.dim(),
            text.n_samples(),
            text.dim()
        )));
    }
    if ts.n_samples() == 0 {
        return Err(Error::invalid("no rows"));
    }
    let mut total = 0.0;
    for i in 0..ts.n_samples() {
        total += cosine(ts.row(i), text.row(i)).ok_or_else(|| Error::invalid(format!("zero-norm row {i}")))?;
    }
    Ok(total / ts.n_samples() as f64)
}

/// Cosine similarity, `None` if either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// Row-wise concatenation `ts ⊕ cond`.
pub fn joint_embed(ts: &EmbeddingMatrix, cond: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if ts.n_samples() != cond.n_samples() {
        return Err(Error::shape(format!("row count mismatch: {} vs {}", ts.n_samples(), cond.n_samples())));
    }
    let d = ts.dim() + cond.dim();
    let mut data = Vec::with_capacity(ts.n_samples() * d);
    for i in 0..ts.n_samples() {
        data.extend_from_slice(ts.row(i));
        data.extend_from_slice(cond.row(i));
    }
    EmbeddingMatrix::new(data, ts.n_samples(), d, ts.role())
}

/// Splits a joint matrix back into its left `left_dim` columns and the rest.
pub fn split_joint(joint: &EmbeddingMatrix, left_dim: usize, right_role: crate::model::EmbeddingRole) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    if left_dim == 0 || left_dim >= joint.dim() {
        return Err(Error::invalid(format!("split point {left_dim} outside (0, {})", joint.dim())));
    }
    let n = joint.n_samples();
    let mut left = Vec::with_capacity(n * left_dim);
    let mut right = Vec::with_capacity(n * (joint.dim() - left_dim));
    for row in joint.rows() {
        left.extend_from_slice(&row[..left_dim]);
        right.extend_from_slice(&row[left_dim..]);
    }
    Ok((
        EmbeddingMatrix::new(left, n, left_dim, joint.role())?,
        EmbeddingMatrix::new(right, n, joint.dim() - left_dim, right_role)?,
    ))
}

fn check_aligned(ts_real: &EmbeddingMatrix, ts_gen: &EmbeddingMatrix, cond: &EmbeddingMatrix) -> Result<()> {
    if ts_real.n_samples() != cond.n_samples() || ts_gen.n_samples() != cond.n_samples() {
        return Err(Error::shape(format!(
            "real {}, generated {} and condition {} rows must align",
            ts_real.n_samples(),
            ts_gen.n_samples(),
            cond.n_samples()
        )));
    }
    Ok(())
}

/// Fréchet distance in the joint (series ⊕ condition) embedding space.
pub fn j_ftsd(ts_real: &EmbeddingMatrix, ts_gen: &EmbeddingMatrix, cond: &EmbeddingMatrix) -> Result<f64> {
    check_aligned(ts_real, ts_gen, cond)?;
    fid(&joint_embed(ts_real, cond)?, &joint_embed(ts_gen, cond)?)
}

/// Precision and recall in the joint embedding space.
pub fn joint_precision_recall(
    ts_real: &EmbeddingMatrix,
    ts_gen: &EmbeddingMatrix,
    cond: &EmbeddingMatrix,
    k: usize,
) -> Result<(f64, f64)> {
    check_aligned(ts_real, ts_gen, cond)?;
    let jr = joint_embed(ts_real, cond)?;
    let jg = joint_embed(ts_gen, cond)?;
    Ok((precision(&jr, &jg, k)?, recall(&jr, &jg, k)?))
}
