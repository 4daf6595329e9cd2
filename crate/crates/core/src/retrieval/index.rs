//! In-memory gallery index and its binary file.
//!
//! ```text
//! "RIDX" | version u32 = 1 | flags u32 | N u32 | D u32 | R_total u64
//! | N x (len u32, UTF-8 image id)
//! | (N + 1) x u64 region offsets
//! | N x D f32 R-MAC+ rows | R_total x D f32 region rows
//! | 32-byte whitening fingerprint
//! ```
//!
//! Flag bit 0 marks a multi-resolution index, bit 1 the baseline detector.

use std::collections::HashSet;
use std::path::Path;

use crate::descriptor::ImageDescriptors;
use crate::error::{Error, Result};
use crate::io_util::{self, LeReader};
use crate::region_grid::Detector;

pub const RIDX_MAGIC: [u8; 4] = *b"RIDX";
pub const RIDX_VERSION: u32 = 1;

const FLAG_MULTIRES: u32 = 1;
const FLAG_TOLIAS: u32 = 1 << 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryIndex {
    image_ids: Vec<String>,
    dim: usize,
    rmac: Vec<f32>,
    regions: Vec<f32>,
    offsets: Vec<u64>,
    multiresolution: bool,
    detector: Detector,
    fingerprint: [u8; 32],
}

/// Assembles the index in gallery order.
pub fn build_index(
    gallery: &[ImageDescriptors],
    detector: Detector,
    fingerprint: [u8; 32],
) -> Result<GalleryIndex> {
    let first = gallery.first().ok_or(Error::Empty("gallery has no images"))?;
    let dim = first.rmac_plus.dim();
    let resolutions = first.resolutions;
    let mut seen = HashSet::with_capacity(gallery.len());
    let total_regions: usize = gallery.iter().map(|g| g.db_regions.len()).sum();
    let mut index = GalleryIndex {
        image_ids: Vec::with_capacity(gallery.len()),
        dim,
        rmac: Vec::with_capacity(gallery.len() * dim),
        regions: Vec::with_capacity(total_regions * dim),
        offsets: Vec::with_capacity(gallery.len() + 1),
        multiresolution: resolutions == 3,
        detector,
        fingerprint,
    };
    index.offsets.push(0);
    for img in gallery {
        if img.resolutions != resolutions {
            return Err(Error::Index(format!(
                "image {:?} has {} resolutions, gallery mode uses {resolutions}",
                img.image_id, img.resolutions
            )));
        }
        if !seen.insert(img.image_id.as_str()) {
            return Err(Error::DuplicateId(img.image_id.clone()));
        }
        if img.db_regions.is_empty() {
            return Err(Error::Index(format!("image {:?} has no regions", img.image_id)));
        }
        for d in std::iter::once(&img.rmac_plus).chain(&img.db_regions) {
            if d.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: d.dim(),
                });
            }
        }
        index.image_ids.push(img.image_id.clone());
        index.rmac.extend_from_slice(&img.rmac_plus.values);
        for d in &img.db_regions {
            index.regions.extend_from_slice(&d.values);
        }
        let last = *index.offsets.last().unwrap();
        index.offsets.push(last + img.db_regions.len() as u64);
    }
    Ok(index)
}

impl GalleryIndex {
    pub fn len(&self) -> usize {
        self.image_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn multiresolution(&self) -> bool {
        self.multiresolution
    }

    pub fn detector(&self) -> Detector {
        self.detector
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn total_regions(&self) -> usize {
        self.regions.len() / self.dim
    }

    pub fn rmac_row(&self, image: usize) -> &[f32] {
        &self.rmac[image * self.dim..(image + 1) * self.dim]
    }

    pub fn region_row(&self, row: usize) -> &[f32] {
        &self.regions[row * self.dim..(row + 1) * self.dim]
    }

    /// Global row range of an image's regions.
    pub fn region_range(&self, image: usize) -> std::ops::Range<usize> {
        self.offsets[image] as usize..self.offsets[image + 1] as usize
    }

    pub fn image_position(&self, image_id: &str) -> Option<usize> {
        self.image_ids.iter().position(|id| id == image_id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 4 * (self.rmac.len() + self.regions.len()));
        let mut flags = 0u32;
        if self.multiresolution {
            flags |= FLAG_MULTIRES;
        }
        if self.detector == Detector::ToliasBaseline {
            flags |= FLAG_TOLIAS;
        }
        out.extend_from_slice(&RIDX_MAGIC);
        out.extend_from_slice(&RIDX_VERSION.to_le_bytes());
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.total_regions() as u64).to_le_bytes());
        for id in &self.image_ids {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        for o in &self.offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        io_util::put_f32s(&mut out, &self.rmac);
        io_util::put_f32s(&mut out, &self.regions);
        out.extend_from_slice(&self.fingerprint);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = LeReader::new(bytes, "index");
        r.magic(&RIDX_MAGIC)?;
        let version = r.u32()?;
        if version != RIDX_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let flags = r.u32()?;
        let n = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let total = usize::try_from(r.u64()?)
            .map_err(|_| Error::DimensionOverflow("R_total".into()))?;
        if n == 0 || dim == 0 {
            return Err(Error::Index(format!("header declares N={n}, D={dim}")));
        }
        let mut image_ids = Vec::with_capacity(n.min(r.remaining() / 4));
        let mut seen = HashSet::new();
        for _ in 0..n {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            let id = std::str::from_utf8(raw)
                .map_err(|e| Error::Index(format!("image id is not UTF-8: {e}")))?
                .to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            image_ids.push(id);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            offsets.push(r.u64()?);
        }
        if offsets[0] != 0
            || offsets.windows(2).any(|w| w[0] > w[1])
            || offsets[n] != total as u64
        {
            return Err(Error::Index("offsets do not cover the region matrix".into()));
        }
        let rmac_len = n
            .checked_mul(dim)
            .ok_or_else(|| Error::DimensionOverflow("N x D".into()))?;
        let region_len = total
            .checked_mul(dim)
            .ok_or_else(|| Error::DimensionOverflow("R_total x D".into()))?;
        let rmac = r.f32_vec(rmac_len)?;
        let regions = r.f32_vec(region_len)?;
        let fingerprint: [u8; 32] = r.take(32)?.try_into().unwrap();
        if r.remaining() != 0 {
            return Err(Error::Index(format!("{} trailing bytes", r.remaining())));
        }
        if let Some(index) = rmac.iter().chain(&regions).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            image_ids,
            dim,
            rmac,
            regions,
            offsets,
            multiresolution: flags & FLAG_MULTIRES != 0,
            detector: if flags & FLAG_TOLIAS != 0 {
                Detector::ToliasBaseline
            } else {
                Detector::RmacPlus
            },
            fingerprint,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io_util::write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&io_util::read_all(path.as_ref())?)
    }

    /// Loads an index and warns when it was built with a different
    /// whitening model than `expected`.
    pub fn load_checked(path: impl AsRef<Path>, expected: &[u8; 32]) -> Result<Self> {
        let index = Self::load(path.as_ref())?;
        if &index.fingerprint != expected {
            log::warn!(
                "{}: whitening fingerprint differs from the loaded model",
                path.as_ref().display()
            );
        }
        Ok(index)
    }
}
