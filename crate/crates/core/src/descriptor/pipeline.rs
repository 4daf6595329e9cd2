//! Per-image descriptor computation: regions -> MAC -> L2 -> whitening -> L2,
//! then sum-pooling within and across resolutions.

use rayon::prelude::*;

use super::{l2_normalize, mac_pool, multires_aggregate, rmac_aggregate, whiten, Descriptor, WhiteningModel};
use crate::error::{Error, Result};
use crate::region_grid::{project_bbox, GridSpec, PixelBox};
use crate::tensor_store::{FeatureMap, ImageFeatures, ResolutionTag};

/// Query bounding box together with the pixel size of the base image it
/// refers to. Projection is scale-free, so the same box crops every
/// resolution of the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec {
    pub bbox: PixelBox,
    pub image_size: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDescriptors {
    pub image_id: String,
    /// Number of resolutions the descriptors were computed from (1 or 3).
    pub resolutions: usize,
    pub rmac_plus: Descriptor,
    /// Whitened region descriptors, resolution-major (base, up25, down25).
    pub db_regions: Vec<Descriptor>,
}

fn check_features(features: &ImageFeatures) -> Result<usize> {
    let tags: Vec<ResolutionTag> = features.maps.iter().map(|(t, _)| *t).collect();
    let ok = tags == ResolutionTag::ALL[..1] || tags == ResolutionTag::ALL;
    if !ok {
        return Err(Error::Resolution {
            image_id: features.image_id.clone(),
            message: format!("expected [base] or [base, up25, down25], got {tags:?}"),
        });
    }
    let channels = features.maps[0].1.channels();
    for (tag, map) in &features.maps {
        if map.channels() != channels {
            return Err(Error::Resolution {
                image_id: features.image_id.clone(),
                message: format!("{tag} has {} channels, base has {channels}", map.channels()),
            });
        }
    }
    Ok(channels)
}

fn cropped<'a>(map: &'a FeatureMap, crop: Option<&CropSpec>) -> Result<std::borrow::Cow<'a, FeatureMap>> {
    match crop {
        None => Ok(std::borrow::Cow::Borrowed(map)),
        Some(c) => {
            let region = project_bbox(&c.bbox, c.image_size, (map.width(), map.height()))?;
            if region.x0 == 0 && region.y0 == 0 && region.w == map.width() && region.h == map.height() {
                Ok(std::borrow::Cow::Borrowed(map))
            } else {
                Ok(std::borrow::Cow::Owned(map.crop(&region)?))
            }
        }
    }
}

fn per_resolution_macs(map: &FeatureMap, grid: &GridSpec) -> Result<Vec<Descriptor>> {
    grid.regions(map.width(), map.height())?
        .iter()
        .map(|r| mac_pool(map, r).map(|d| l2_normalize(&d)))
        .collect()
}

/// L2-normalized region MACs over all resolutions of an image; the
/// training material for whitening.
pub fn region_macs(features: &ImageFeatures, grid: &GridSpec, crop: Option<&CropSpec>) -> Result<Vec<Descriptor>> {
    check_features(features)?;
    let mut out = Vec::new();
    for (_, map) in &features.maps {
        out.extend(per_resolution_macs(&*cropped(map, crop)?, grid)?);
    }
    Ok(out)
}

/// Fits whitening on the region MACs of a set of images, in image order.
pub fn fit_whitening_on_images(images: &[ImageFeatures], grid: &GridSpec, epsilon: f64) -> Result<WhiteningModel> {
    let per_image = images
        .par_iter()
        .map(|f| region_macs(f, grid, None))
        .collect::<Result<Vec<_>>>()?;
    let dim = per_image
        .iter()
        .flatten()
        .next()
        .map(Descriptor::dim)
        .ok_or(Error::Empty("no training regions"))?;
    let mut rows = Vec::with_capacity(per_image.iter().map(Vec::len).sum::<usize>() * dim);
    for d in per_image.iter().flatten() {
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

pub fn compute_image_descriptors(
    features: &ImageFeatures,
    model: &WhiteningModel,
    grid: &GridSpec,
    crop: Option<&CropSpec>,
) -> Result<ImageDescriptors> {
    let channels = check_features(features)?;
    if channels != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: channels,
        });
    }
    let mut db_regions = Vec::new();
    let mut per_resolution = Vec::with_capacity(features.maps.len());
    for (_, map) in &features.maps {
        let whitened = per_resolution_macs(&*cropped(map, crop)?, grid)?
            .iter()
            .map(|d| whiten(d, model))
            .collect::<Result<Vec<_>>>()?;
        per_resolution.push(rmac_aggregate(&whitened)?);
        db_regions.extend(whitened);
    }
    let rmac_plus = multires_aggregate(&per_resolution, features.maps.len())?;
    Ok(ImageDescriptors {
        image_id: features.image_id.clone(),
        resolutions: features.maps.len(),
        rmac_plus,
        db_regions,
    })
}
