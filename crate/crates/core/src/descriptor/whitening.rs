//! PCA whitening fitted on L2-normalized region descriptors.
//!
//! File format, all little-endian:
//!
//! ```text
//! "WHTN" | version u32 = 1 | D u32 | epsilon f64 | mean D x f64 | projection D x D f64 (row-major)
//! ```

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{normalize_f64, Descriptor, NormState};
use crate::error::{Error, Result};
use crate::io_util::{self, LeReader};

pub const WHTN_MAGIC: [u8; 4] = *b"WHTN";
pub const WHTN_VERSION: u32 = 1;
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Rows accumulated per covariance block. Fixed so that the reduction
/// order, and therefore the fitted model, does not depend on thread count.
const COV_BLOCK_ROWS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningModel {
    dim: usize,
    mean: Vec<f64>,
    /// `dim x dim`, row `k` is the k-th eigenvector over sqrt(eigenvalue + epsilon).
    projection: Vec<f64>,
    epsilon: f64,
    /// Known only for freshly fitted models.
    fitted_on: Option<usize>,
    eigenvalues: Option<Vec<f64>>,
}

impl WhiteningModel {
    /// Zero mean, identity projection.
    pub fn identity(dim: usize) -> Self {
        let mut projection = vec![0.0; dim * dim];
        for i in 0..dim {
            projection[i * dim + i] = 1.0;
        }
        Self {
            dim,
            mean: vec![0.0; dim],
            projection,
            epsilon: 0.0,
            fitted_on: None,
            eigenvalues: None,
        }
    }

    pub fn from_parts(mean: Vec<f64>, projection: Vec<f64>, epsilon: f64) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::Empty("whitening model of dimension 0"));
        }
        if projection.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: projection.len(),
            });
        }
        if let Some(index) = mean.iter().chain(&projection).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            dim,
            mean,
            projection,
            epsilon,
            fitted_on: None,
            eigenvalues: None,
        })
    }

    /// Fits on `n = rows.len() / dim` row-major training vectors.
    pub fn fit_rows(rows: &[f32], dim: usize, epsilon: f64) -> Result<Self> {
        if dim == 0 || !rows.len().is_multiple_of(dim) {
            return Err(Error::InvalidShape(format!(
                "{} values do not split into rows of {dim}",
                rows.len()
            )));
        }
        let n = rows.len() / dim;
        if n < 2 {
            return Err(Error::InvalidShape(format!(
                "whitening needs at least 2 training vectors, got {n}"
            )));
        }

        let mut mean = vec![0.0f64; dim];
        for row in rows.chunks_exact(dim) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }

        let partials: Vec<DMatrix<f64>> = rows
            .par_chunks(COV_BLOCK_ROWS * dim)
            .map(|block| {
                let r = block.len() / dim;
                let centered = DMatrix::from_fn(r, dim, |i, j| block[i * dim + j] as f64 - mean[j]);
                centered.tr_mul(&centered)
            })
            .collect();
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for p in &partials {
            cov += p;
        }
        cov /= n as f64;
        // Enforce exact symmetry before the eigensolver.
        for i in 0..dim {
            for j in 0..i {
                let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = avg;
                cov[(j, i)] = avg;
            }
        }

        let eig = SymmetricEigen::new(cov);
        let mut pairs: Vec<(f64, Vec<f64>)> = (0..dim)
            .map(|k| {
                let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
                if let Some(&first) = v.iter().find(|&&c| c != 0.0) {
                    if first < 0.0 {
                        v.iter_mut().for_each(|c| *c = -*c);
                    }
                }
                (eig.eigenvalues[k], v)
            })
            .collect();
        pairs.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| {
                a.1.iter()
                    .zip(&b.1)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
        });

        let mut projection = Vec::with_capacity(dim * dim);
        let mut eigenvalues = Vec::with_capacity(dim);
        for (lambda, v) in &pairs {
            let scale = 1.0 / (lambda.max(0.0) + epsilon).sqrt();
            projection.extend(v.iter().map(|c| c * scale));
            eigenvalues.push(*lambda);
        }

        Ok(Self {
            dim,
            mean,
            projection,
            epsilon,
            fitted_on: Some(n),
            eigenvalues: Some(eigenvalues),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn fitted_on(&self) -> Option<usize> {
        self.fitted_on
    }

    /// Eigenvalues in projection-row order (descending); fitted models only.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    /// `projection * (values - mean)`, before the final normalization.
    pub fn project(&self, values: &[f32]) -> Result<Vec<f64>> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: values.len(),
            });
        }
        let centered: Vec<f64> = values.iter().zip(&self.mean).map(|(&v, m)| v as f64 - m).collect();
        Ok(self
            .projection
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(&centered).map(|(p, c)| p * c).sum())
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * (self.dim + self.dim * self.dim));
        out.extend_from_slice(&WHTN_MAGIC);
        out.extend_from_slice(&WHTN_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.epsilon.to_le_bytes());
        io_util::put_f64s(&mut out, &self.mean);
        io_util::put_f64s(&mut out, &self.projection);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = LeReader::new(bytes, "whitening model");
        r.magic(&WHTN_MAGIC)?;
        let version = r.u32()?;
        if version != WHTN_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = r.u32()? as usize;
        let epsilon = r.f64()?;
        let mean = r.f64_vec(dim)?;
        let sq = dim
            .checked_mul(dim)
            .ok_or_else(|| Error::DimensionOverflow(format!("D = {dim}")))?;
        let projection = r.f64_vec(sq)?;
        if r.remaining() != 0 {
            return Err(Error::InvalidShape(format!("{} trailing bytes", r.remaining())));
        }
        Self::from_parts(mean, projection, epsilon)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io_util::write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&io_util::read_all(path.as_ref())?)
    }

    /// SHA-256 of the serialized model.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

/// Fits a whitening model on L2-normalized region descriptors.
pub fn fit_whitening(training: &[Descriptor]) -> Result<WhiteningModel> {
    fit_whitening_with(training, DEFAULT_EPSILON)
}

pub fn fit_whitening_with(training: &[Descriptor], epsilon: f64) -> Result<WhiteningModel> {
    let first = training.first().ok_or(Error::Empty("no training descriptors"))?;
    let dim = first.dim();
    let mut rows = Vec::with_capacity(training.len() * dim);
    for d in training {
        if d.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: d.dim(),
            });
        }
        rows.extend_from_slice(&d.values);
    }
    WhiteningModel::fit_rows(&rows, dim, epsilon)
}

/// Centers, projects and re-normalizes a descriptor.
pub fn whiten(d: &Descriptor, model: &WhiteningModel) -> Result<Descriptor> {
    let projected = model.project(&d.values)?;
    Ok(Descriptor::new(normalize_f64(&projected), NormState::WhitenedNormalized))
}
