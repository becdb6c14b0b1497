//! Feature standardization, PCA to a small component count, and IQR-based
//! outlier removal.
//!
//! Band powers differ by orders of magnitude across bands, so frames are
//! z-scored per feature before PCA; unscaled PCA would be dominated by
//! low-frequency power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen};

/// Per-feature z-scoring parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Sample standard deviation (N-1 denominator); 1.0 placeholder where
    /// `constant_mask` is set.
    pub sd: Vec<f64>,
    pub constant_mask: Vec<bool>,
}

impl Standardizer {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }
}

/// Fits per-column mean and standard deviation. Zero-variance columns are
/// recorded in the constant mask and standardize to 0.
pub fn standardize_fit(frames: &[Vec<f64>]) -> Result<Standardizer> {
    let n = frames.len();
    if n < 2 {
        return Err(Error::Data(format!(
            "standardizer needs at least 2 frames, got {n}"
        )));
    }
    let cols = frames[0].len();
    if frames.iter().any(|r| r.len() != cols) {
        return Err(Error::Data("ragged frame rows".into()));
    }

    let mut mean = vec![0.0; cols];
    for row in frames {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut var = vec![0.0; cols];
    for row in frames {
        for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
            let d = x - m;
            *v += d * d;
        }
    }
    let mut sd = vec![1.0; cols];
    let mut constant_mask = vec![false; cols];
    for j in 0..cols {
        let s = (var[j] / (n - 1) as f64).sqrt();
        // treat numerically-zero spread as constant
        if s <= 1e-12 * (1.0 + mean[j].abs()) {
            constant_mask[j] = true;
        } else {
            sd[j] = s;
        }
    }
    Ok(Standardizer {
        mean,
        sd,
        constant_mask,
    })
}

/// Applies `(x - mean) / sd` per column; constant columns map to 0.
pub fn standardize_apply(s: &Standardizer, frames: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let cols = s.n_features();
    if frames.iter().any(|r| r.len() != cols) {
        return Err(Error::Data(format!(
            "frame width does not match standardizer's {cols} features"
        )));
    }
    Ok(frames
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| {
                    if s.constant_mask[j] {
                        0.0
                    } else {
                        (v - s.mean[j]) / s.sd[j]
                    }
                })
                .collect()
        })
        .collect())
}

/// Inverse of [`standardize_apply`]; constant columns are restored to their
/// training mean.
pub fn standardize_invert(s: &Standardizer, frames: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let cols = s.n_features();
    if frames.iter().any(|r| r.len() != cols) {
        return Err(Error::Data(format!(
            "frame width does not match standardizer's {cols} features"
        )));
    }
    Ok(frames
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| {
                    if s.constant_mask[j] {
                        s.mean[j]
                    } else {
                        v * s.sd[j] + s.mean[j]
                    }
                })
                .collect()
        })
        .collect())
}

/// Principal components of the training covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    /// Orthonormal component rows, n_components x n_features.
    pub components: Vec<Vec<f64>>,
    /// Matching covariance eigenvalues, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Eigenvalue over total variance, each in [0,1], sum <= 1.
    pub explained_variance_ratio: Vec<f64>,
    pub training_mean: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_features(&self) -> usize {
        self.training_mean.len()
    }
}

/// Fits PCA as the top eigenvectors of the sample covariance (N-1
/// denominator) of mean-centered frames. Sign convention: each component's
/// largest-magnitude entry is positive.
pub fn pca_fit(frames: &[Vec<f64>], n_components: usize) -> Result<PcaModel> {
    let n = frames.len();
    if n_components == 0 {
        return Err(Error::Config("n_components must be >= 1".into()));
    }
    if n <= n_components {
        return Err(Error::Data(format!(
            "pca needs more frames ({n}) than components ({n_components})"
        )));
    }
    let cols = frames[0].len();
    if cols < n_components {
        return Err(Error::Config(format!(
            "cannot extract {n_components} components from {cols} features"
        )));
    }
    if frames.iter().any(|r| r.len() != cols) {
        return Err(Error::Data("ragged frame rows".into()));
    }

    let mut mean = vec![0.0; cols];
    for row in frames {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut cov = vec![vec![0.0; cols]; cols];
    for row in frames {
        let centered: Vec<f64> = row.iter().zip(&mean).map(|(&v, &m)| v - m).collect();
        for i in 0..cols {
            let ci = centered[i];
            for j in i..cols {
                cov[i][j] += ci * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..cols {
        for j in i..cols {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }

    let (eigenvalues, eigenvectors) = symmetric_eigen(&cov);
    let total_variance: f64 = eigenvalues.iter().map(|&v| v.max(0.0)).sum();

    let mut components = Vec::with_capacity(n_components);
    let mut explained_variance = Vec::with_capacity(n_components);
    let mut explained_variance_ratio = Vec::with_capacity(n_components);
    for k in 0..n_components {
        let mut vec_k = eigenvectors[k].clone();
        // deterministic sign: largest-magnitude entry positive
        let mut best = 0usize;
        for (j, &v) in vec_k.iter().enumerate() {
            if v.abs() > vec_k[best].abs() {
                best = j;
            }
        }
        if vec_k[best] < 0.0 {
            for v in vec_k.iter_mut() {
                *v = -*v;
            }
        }
        components.push(vec_k);
        let ev = eigenvalues[k].max(0.0);
        explained_variance.push(ev);
        explained_variance_ratio.push(if total_variance > 0.0 {
            ev / total_variance
        } else {
            0.0
        });
    }

    Ok(PcaModel {
        components,
        explained_variance,
        explained_variance_ratio,
        training_mean: mean,
    })
}

/// Projects frames onto the components: `(x - training_mean) . components^T`.
pub fn pca_transform(model: &PcaModel, frames: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let cols = model.n_features();
    if frames.iter().any(|r| r.len() != cols) {
        return Err(Error::Data(format!(
            "frame width does not match pca's {cols} features"
        )));
    }
    Ok(frames
        .iter()
        .map(|row| {
            let centered: Vec<f64> = row
                .iter()
                .zip(&model.training_mean)
                .map(|(&v, &m)| v - m)
                .collect();
            model.components.iter().map(|c| dot(c, &centered)).collect()
        })
        .collect())
}

/// Maps scores back to feature space: `scores . components + training_mean`.
pub fn pca_reconstruct(model: &PcaModel, scores: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = model.n_components();
    if scores.iter().any(|r| r.len() != k) {
        return Err(Error::Data(format!(
            "score width does not match pca's {k} components"
        )));
    }
    Ok(scores
        .iter()
        .map(|s| {
            let mut row = model.training_mean.clone();
            for (weight, component) in s.iter().zip(&model.components) {
                for (r, &c) in row.iter_mut().zip(component) {
                    *r += weight * c;
                }
            }
            row
        })
        .collect())
}

/// Removes values strictly outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`, with
/// quartiles by linear interpolation between order statistics
/// (position `(n-1) * q`). Returns the kept values (input order) and the
/// outlier mask. Single pass, no re-estimation.
pub fn iqr_filter(values: &[f64]) -> Result<(Vec<f64>, Vec<bool>)> {
    let n = values.len();
    if n < 4 {
        return Err(Error::Data(format!(
            "iqr filter needs at least 4 values, got {n}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("iqr filter requires finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = interpolated_quantile(&sorted, 0.25);
    let q3 = interpolated_quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo = q1 - 1.5 * iqr;
    let hi = q3 + 1.5 * iqr;

    let mask: Vec<bool> = values.iter().map(|&v| v < lo || v > hi).collect();
    let kept: Vec<f64> = values
        .iter()
        .zip(&mask)
        .filter(|&(_, &out)| !out)
        .map(|(&v, _)| v)
        .collect();
    Ok((kept, mask))
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lower = pos.floor() as usize;
    let upper = pos.ceil() as usize;
    if lower == upper {
        sorted[lower]
    } else {
        let frac = pos - lower as f64;
        sorted[lower] + frac * (sorted[upper] - sorted[lower])
    }
}
