//! Feature-map container and its binary file format.
//!
//! A feature-map file is a 20-byte header followed by the payload:
//!
//! ```text
//! "FMAP" | version u32 = 1 | W u32 | H u32 | D u32 | W*H*D x f32
//! ```
//!
//! All integers and floats are little-endian. The payload is laid out in
//! `(y, x, d)` order with the channel index innermost, so the value at
//! `(y, x, d)` lives at payload offset `4 * ((y * W + x) * D + d)`.

mod manifest;

use std::path::Path;

pub use manifest::{FeatureSetManifest, ImageFeatures, ManifestEntry, ResolutionMode, ResolutionTag};

use crate::error::{Error, Result};
use crate::io_util::{self, LeReader};
use crate::region_grid::Region;

pub const FMAP_MAGIC: [u8; 4] = *b"FMAP";
pub const FMAP_VERSION: u32 = 1;
pub const FMAP_HEADER_LEN: usize = 20;

/// A `W x H x D` activation tensor for one image at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidShape(format!(
                "feature map dims must be positive, got {width}x{height}x{channels}"
            )));
        }
        let len = checked_len(width, height, channels)?;
        if data.len() != len {
            return Err(Error::InvalidShape(format!(
                "data length {} does not match {width}x{height}x{channels} = {len}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a map by evaluating `f(y, x, d)` at every cell.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(checked_len(width, height, channels)?);
        for y in 0..height {
            for x in 0..width {
                for d in 0..channels {
                    data.push(f(y, x, d));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, d: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + d]
    }

    /// Channel vector at spatial position `(y, x)`.
    pub fn channel_vector(&self, y: usize, x: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Contiguous channel vectors of row `y` for columns `x0..x0 + w`.
    pub(crate) fn row_span(&self, y: usize, x0: usize, w: usize) -> &[f32] {
        let start = (y * self.width + x0) * self.channels;
        &self.data[start..start + w * self.channels]
    }

    pub fn check_region(&self, region: &Region) -> Result<()> {
        if region.w == 0
            || region.h == 0
            || region.x0 + region.w > self.width
            || region.y0 + region.h > self.height
        {
            return Err(Error::RegionOutOfBounds {
                region: region.to_string(),
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Copies the activations inside `region` into a new map.
    pub fn crop(&self, region: &Region) -> Result<FeatureMap> {
        self.check_region(region)?;
        let mut data = Vec::with_capacity(region.w * region.h * self.channels);
        for y in region.y0..region.y0 + region.h {
            data.extend_from_slice(self.row_span(y, region.x0, region.w));
        }
        Ok(FeatureMap {
            width: region.w,
            height: region.h,
            channels: self.channels,
            data,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FMAP_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&FMAP_MAGIC);
        out.extend_from_slice(&FMAP_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        io_util::put_f32s(&mut out, &self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = LeReader::new(bytes, "feature map");
        r.magic(&FMAP_MAGIC)?;
        let version = r.u32()?;
        if version != FMAP_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let channels = r.u32()? as usize;
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidShape(format!(
                "header declares {width}x{height}x{channels}"
            )));
        }
        let len = checked_len(width, height, channels)?;
        let payload = len
            .checked_mul(4)
            .ok_or_else(|| Error::DimensionOverflow(format!("{width}x{height}x{channels}")))?;
        if r.remaining() < payload {
            return Err(Error::Truncated {
                what: "feature map payload",
                expected: payload as u64,
                actual: r.remaining() as u64,
            });
        }
        if r.remaining() > payload {
            return Err(Error::InvalidShape(format!(
                "{} trailing bytes after payload",
                r.remaining() - payload
            )));
        }
        let data = r.f32_vec(len)?;
        Self::new(width, height, channels, data)
    }
}

fn checked_len(width: usize, height: usize, channels: usize) -> Result<usize> {
    if width > u32::MAX as usize || height > u32::MAX as usize || channels > u32::MAX as usize {
        return Err(Error::DimensionOverflow(format!(
            "{width}x{height}x{channels} exceeds u32 header fields"
        )));
    }
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::DimensionOverflow(format!("{width}x{height}x{channels}")))
}

/// Writes `map` to `path` atomically (temp file, then rename).
pub fn write_feature_map(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    // Maps built through `new` are already valid; re-check in case data was
    // produced by an unchecked path in the future.
    if let Some(index) = map.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    io_util::write_atomic(path.as_ref(), &map.to_bytes())
}

pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let bytes = io_util::read_all(path.as_ref())?;
    FeatureMap::from_bytes(&bytes)
}
