//! Gaussian feature statistics and the Fréchet distance between them.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{config_err, shape_err, Error, Result};

/// Eigenvalues above this (negative) bound are treated as rounding noise
/// and clipped to zero.
pub const EIGEN_CLIP: f64 = -1e-6;

/// Mean and unbiased covariance (row-major `dim x dim`) of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub dim: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

/// Two-pass mean and `n - 1` covariance of `n` feature vectors stored
/// row-major in `features`.
pub fn feature_stats(features: &[f64], dim: usize) -> Result<FeatureStats> {
    if dim == 0 || !features.len().is_multiple_of(dim) {
        return Err(shape_err!("{} feature values do not split into vectors of dim {}", features.len(), dim));
    }
    let n = features.len() / dim;
    if n < 2 {
        return Err(config_err!("feature statistics need at least 2 vectors, got {}", n));
    }
    let mut mean = vec![0.0; dim];
    for row in features.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for row in features.chunks_exact(dim) {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            for j in i..dim {
                cov[i * dim + j] += ci * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / (n - 1) as f64;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    Ok(FeatureStats { dim, mean, cov })
}

fn clipped_eigen(m: DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let sym = (&m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    for v in eig.eigenvalues.iter_mut() {
        if *v < EIGEN_CLIP {
            return Err(Error::Numerical(alloc::format!("{} has eigenvalue {:e}", what, *v)));
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

/// `|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
///
/// The trace of the square root is taken from the eigenvalues of the
/// symmetric product `S_a^(1/2) S_b S_a^(1/2)`, which shares its spectrum
/// with `S_a S_b`.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim != b.dim {
        return Err(shape_err!("feature dims differ: {} vs {}", a.dim, b.dim));
    }
    let d = a.dim;
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let sa = DMatrix::from_row_slice(d, d, &a.cov);
    let sb = DMatrix::from_row_slice(d, d, &b.cov);
    let ea = clipped_eigen(sa.clone(), "first covariance")?;
    let sqrt_a = ea.eigenvectors.clone()
        * DMatrix::from_diagonal(&ea.eigenvalues.map(libm::sqrt))
        * ea.eigenvectors.transpose();
    let inner = &sqrt_a * &sb * &sqrt_a;
    let tr_sqrt: f64 = clipped_eigen(inner, "covariance product")?
        .eigenvalues
        .iter()
        .map(|v| libm::sqrt(*v))
        .sum();
    let fd = mean_term + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
    Ok(fd.max(0.0))
}
