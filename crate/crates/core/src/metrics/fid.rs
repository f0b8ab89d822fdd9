//! Fréchet distance between Gaussians fitted to feature activations.
//!
//! d² = ||mu_a - mu_b||² + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}). The matrix
//! square root runs through the similarity-transformed product
//! S_a^{1/2} S_b S_a^{1/2}, which is symmetric PSD whenever both inputs
//! are, so a plain symmetric eigendecomposition suffices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_mul, sym_eigen};
use crate::tensor::Tensor;

/// Eigenvalues this far below zero are treated as rounding noise and
/// clamped; anything lower means the matrix is not a covariance.
pub const PSD_EIGEN_TOL: f64 = 1e-8;

/// Fitted Gaussian over a feature space.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub mean: Vec<f64>,
    /// Row-major d x d, symmetric.
    pub cov: Vec<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>, n: usize) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::Numerical(format!(
                "covariance buffer {} does not match dim {d}",
                cov.len()
            )));
        }
        if n < 2 {
            return Err(Error::Numerical(format!(
                "gaussian statistics need at least 2 samples, got {n}"
            )));
        }
        for r in 0..d {
            for c in 0..r {
                let diff = (cov[r * d + c] - cov[c * d + r]).abs();
                let scale = cov[r * d + c].abs().max(cov[c * d + r].abs()).max(1.0);
                if diff > 1e-10 * scale {
                    return Err(Error::Numerical(format!(
                        "covariance not symmetric at ({r},{c})"
                    )));
                }
            }
        }
        Ok(GaussianStats { mean, cov, n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance (divisor n-1) of a (n, d) feature
/// matrix.
pub fn gaussian_stats(features: &Tensor<f64>) -> Result<GaussianStats> {
    if features.rank() != 2 {
        return Err(Error::InvalidShape {
            shape: features.shape().to_vec(),
            message: "gaussian_stats expects a (n, d) feature matrix".into(),
        });
    }
    let n = features.dim(0);
    let d = features.dim(1);
    if n < 2 {
        return Err(Error::Numerical(format!(
            "gaussian statistics need at least 2 samples, got {n}"
        )));
    }
    let data = features.data();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += data[i * d + j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            centered[j] = data[i * d + j] - mean[j];
        }
        for r in 0..d {
            let cr = centered[r];
            for c in r..d {
                cov[r * d + c] += cr * centered[c];
            }
        }
    }
    let denom = (n - 1) as f64;
    for r in 0..d {
        for c in r..d {
            let v = cov[r * d + c] / denom;
            cov[r * d + c] = v;
            cov[c * d + r] = v;
        }
    }
    GaussianStats::new(mean, cov, n)
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Symmetric PSD square root with clamping of rounding-level negative
/// eigenvalues; genuinely negative spectra are rejected.
fn sqrt_psd(a: &[f64], d: usize, what: &str) -> Result<Vec<f64>> {
    let eig = sym_eigen(a, d)?;
    for &v in &eig.values {
        if v < -PSD_EIGEN_TOL {
            return Err(Error::Numerical(format!(
                "{what} has negative eigenvalue {v:.3e}"
            )));
        }
    }
    Ok(eig.reassemble(|v| v.max(0.0).sqrt()))
}

/// Squared Fréchet distance between two Gaussians. Symmetric in its
/// arguments and non-negative for PSD covariances.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::Numerical(format!(
            "feature dims differ: {d} vs {}",
            b.dim()
        )));
    }
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();

    let root_a = sqrt_psd(&a.cov, d, "covariance")?;
    let inner = mat_mul(&mat_mul(&root_a, &b.cov, d, d, d), &root_a, d, d, d);
    // Exact symmetrization; the product is symmetric up to rounding.
    let mut sym = inner.clone();
    for r in 0..d {
        for c in 0..r {
            let avg = 0.5 * (sym[r * d + c] + sym[c * d + r]);
            sym[r * d + c] = avg;
            sym[c * d + r] = avg;
        }
    }
    let root_inner = sqrt_psd(&sym, d, "transformed covariance product")?;

    // The root must square back to what it came from, else the
    // decomposition lost the matrix.
    let squared = mat_mul(&root_inner, &root_inner, d, d, d);
    let residual: Vec<f64> = squared.iter().zip(&sym).map(|(x, y)| x - y).collect();
    let scale = frobenius(&sym);
    if frobenius(&residual) > 1e-6 * scale.max(1e-30) && scale > 0.0 {
        return Err(Error::Numerical(
            "matrix square root residual exceeds tolerance".into(),
        ));
    }

    let trace = |m: &[f64]| (0..d).map(|i| m[i * d + i]).sum::<f64>();
    let value = mean_term + trace(&a.cov) + trace(&b.cov) - 2.0 * trace(&root_inner);
    if value < -1e-6 {
        return Err(Error::Numerical(format!(
            "Fréchet distance came out negative: {value:.3e}"
        )));
    }
    Ok(value.max(0.0))
}

/// Distance between Gaussians fitted to two feature matrices.
pub fn fid_from_features(real: &Tensor<f64>, generated: &Tensor<f64>) -> Result<f64> {
    frechet_distance(&gaussian_stats(real)?, &gaussian_stats(generated)?)
}

/// One FID measurement as serialized into the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidRecord {
    pub epoch: usize,
    pub n_real: usize,
    pub n_gen: usize,
    pub fid: f64,
    pub feature_dim: usize,
}
