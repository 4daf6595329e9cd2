//! MAC pooling, normalization and R-MAC aggregation.

mod pipeline;
mod whitening;

pub use pipeline::{compute_image_descriptors, fit_whitening_on_images, region_macs, CropSpec, ImageDescriptors};
pub use whitening::{fit_whitening, fit_whitening_with, whiten, WhiteningModel, DEFAULT_EPSILON, WHTN_MAGIC, WHTN_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region_grid::Region;
use crate::tensor_store::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormState {
    RawMac,
    L2Normalized,
    WhitenedNormalized,
}

/// A D-dimensional descriptor tagged with how far it went through
/// post-processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub values: Vec<f32>,
    pub state: NormState,
}

impl Descriptor {
    pub fn new(values: Vec<f32>, state: NormState) -> Self {
        Self { values, state }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// True for the all-zero vector kept by the zero-region policy.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        norm_f64(self.values.iter().map(|&v| v as f64))
    }
}

fn norm_f64(values: impl Iterator<Item = f64>) -> f64 {
    values.map(|v| v * v).sum::<f64>().sqrt()
}

/// Scales `values` to unit L2 norm. Returns the zero vector unchanged.
pub(crate) fn normalize_f64(values: &[f64]) -> Vec<f32> {
    let norm = norm_f64(values.iter().copied());
    if norm == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v / norm) as f32).collect()
}

/// Channel-wise maximum over the cells of `region`.
pub fn mac_pool(map: &FeatureMap, region: &Region) -> Result<Descriptor> {
    map.check_region(region)?;
    let d = map.channels();
    let mut out = map.channel_vector(region.y0, region.x0).to_vec();
    for y in region.y0..region.y0 + region.h {
        for cell in map.row_span(y, region.x0, region.w).chunks_exact(d) {
            // Values are finite (checked on load), so `max` is exact here.
            for (o, &v) in out.iter_mut().zip(cell) {
                *o = o.max(v);
            }
        }
    }
    Ok(Descriptor::new(out, NormState::RawMac))
}

pub fn l2_normalize(d: &Descriptor) -> Descriptor {
    let values: Vec<f64> = d.values.iter().map(|&v| v as f64).collect();
    Descriptor::new(normalize_f64(&values), NormState::L2Normalized)
}

fn sum_pool(descs: &[Descriptor]) -> Result<Vec<f64>> {
    let first = descs.first().ok_or(Error::Empty("no descriptors to aggregate"))?;
    let dim = first.dim();
    let mut acc = vec![0.0f64; dim];
    for d in descs {
        if d.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: d.dim(),
            });
        }
        for (a, &v) in acc.iter_mut().zip(&d.values) {
            *a += v as f64;
        }
    }
    Ok(acc)
}

/// Sum-pools whitened region descriptors and L2-normalizes the result.
pub fn rmac_aggregate(region_descriptors: &[Descriptor]) -> Result<Descriptor> {
    let acc = sum_pool(region_descriptors)?;
    Ok(Descriptor::new(normalize_f64(&acc), NormState::WhitenedNormalized))
}

/// Combines per-resolution R-MAC descriptors; `expected` is 3 for the
/// multi-resolution mode and 1 otherwise.
pub fn multires_aggregate(per_resolution: &[Descriptor], expected: usize) -> Result<Descriptor> {
    if per_resolution.len() != expected {
        return Err(Error::InvalidShape(format!(
            "expected {expected} per-resolution descriptors, got {}",
            per_resolution.len()
        )));
    }
    rmac_aggregate(per_resolution)
}
