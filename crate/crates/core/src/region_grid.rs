//! Region generation on feature-map coordinates.
//!
//! Two detectors are provided. The R-MAC+ detector works on four levels:
//!
//! | level | x regions | y regions | base side                  |
//! |-------|-----------|-----------|----------------------------|
//! | 0     | 1         | 1         | full map (W x H)           |
//! | 1     | 2 or 1    | 1 or 2    | min(W, H)                  |
//! | 2     | 3         | 2         | ceil(2/3 * min(W, H))      |
//! | 3     | 2         | 3         | ceil(1/2 * min(W, H))      |
//!
//! At level 1 the two squares run along the longer side. Levels 2 and 3 are
//! given for landscape maps and transposed for portrait ones unless
//! [`GridSpec::transpose_portrait`] is off. When `side * count` falls short
//! of the map extent on an axis, the side on that axis is stretched to
//! `ceil(extent / count)`. Region `(i, j)` is centred at
//! `((i + 0.5) * W / xRegions, (j + 0.5) * H / yRegions)`; its top-left corner
//! is the centre minus half the size, rounded half-up and clamped in bounds.
//!
//! The baseline is the rigid multi-scale grid: at scale `l` in `1..=L`,
//! `l * (l + m - 1)` squares of side `ceil(2 * min(W, H) / (l + 1))`, with
//! `l + m - 1` of them along the longer axis, spaced uniformly so that
//! consecutive squares overlap.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle on feature-map cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
    pub level: u32,
}

impl Region {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize, level: u32) -> Self {
        Self { x0, y0, w, h, level }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height, 0)
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.w && y >= self.y0 && y < self.y0 + self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x0 + self.w <= width && self.y0 + self.h <= height
    }

    /// Same rectangle, ignoring the level tag.
    pub fn same_rect(&self, other: &Region) -> bool {
        (self.x0, self.y0, self.w, self.h) == (other.x0, other.y0, other.w, other.h)
    }

    pub fn transposed(&self) -> Region {
        Region::new(self.y0, self.x0, self.h, self.w, self.level)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}[{},{} {}x{}]", self.level, self.x0, self.y0, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    RmacPlus,
    ToliasBaseline,
}

impl Detector {
    pub fn as_str(self) -> &'static str {
        match self {
            Detector::RmacPlus => "rmac_plus",
            Detector::ToliasBaseline => "tolias_baseline",
        }
    }
}

impl FromStr for Detector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rmac_plus" | "rmac+" => Ok(Detector::RmacPlus),
            "tolias_baseline" | "tolias" => Ok(Detector::ToliasBaseline),
            other => Err(format!("unknown detector {other:?}")),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub detector: Detector,
    /// Number of scales. Fixed at 3 (levels 0..=3) for R-MAC+.
    pub levels: u32,
    /// Extra regions along the long axis for the baseline grid.
    pub overlap_m: u32,
    /// Transpose the level-2/3 layouts for portrait maps (R-MAC+ only).
    pub transpose_portrait: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::rmac_plus()
    }
}

impl GridSpec {
    pub fn rmac_plus() -> Self {
        Self {
            detector: Detector::RmacPlus,
            levels: 3,
            overlap_m: 2,
            transpose_portrait: true,
        }
    }

    pub fn tolias(levels: u32, overlap_m: u32) -> Self {
        Self {
            detector: Detector::ToliasBaseline,
            levels,
            overlap_m,
            transpose_portrait: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(Error::InvalidGrid("L must be at least 1".into()));
        }
        if self.overlap_m < 1 {
            return Err(Error::InvalidGrid("m must be at least 1".into()));
        }
        if self.detector == Detector::RmacPlus && self.levels != 3 {
            return Err(Error::InvalidGrid(format!(
                "rmac_plus uses exactly 3 scales, got L={}",
                self.levels
            )));
        }
        Ok(())
    }

    /// Deduplicated regions for a `width x height` map.
    pub fn regions(&self, width: usize, height: usize) -> Result<Vec<Region>> {
        match self.detector {
            Detector::RmacPlus => generate_regions_plus_with(width, height, self.transpose_portrait),
            Detector::ToliasBaseline => generate_regions_tolias(width, height, self),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidShape(format!("map {width}x{height} has an empty side")));
    }
    Ok(())
}

/// Top-left coordinate of the `index`-th of `count` regions of size `size`
/// along an axis of length `extent`, centred at `(index + 0.5) * extent / count`.
fn centered_offset(index: usize, count: usize, extent: usize, size: usize) -> usize {
    // round_half_up((2i+1)*E/(2n) - s/2) = floor(((2i+1)*E - n*s + n) / (2n))
    let (i, n, e, s) = (index as i64, count as i64, extent as i64, size as i64);
    let num = (2 * i + 1) * e - n * s + n;
    let raw = num.div_euclid(2 * n);
    raw.clamp(0, e - s) as usize
}

/// Top-left coordinate of the `index`-th of `count` uniformly spaced regions.
fn uniform_offset(index: usize, count: usize, extent: usize, size: usize) -> usize {
    let slack = (extent - size) as u64;
    if count == 1 {
        // round_half_up(slack / 2)
        return slack.div_ceil(2) as usize;
    }
    let (i, n) = (index as u64, count as u64 - 1);
    ((2 * i * slack + n) / (2 * n)) as usize
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// R-MAC+ regions for one level, without deduplication.
pub fn regions_plus_for_level(width: usize, height: usize, level: u32) -> Result<Vec<Region>> {
    regions_plus_for_level_with(width, height, level, true)
}

pub fn regions_plus_for_level_with(
    width: usize,
    height: usize,
    level: u32,
    transpose_portrait: bool,
) -> Result<Vec<Region>> {
    check_dims(width, height)?;
    let min_side = width.min(height);
    let portrait = width < height;
    let flip = portrait && transpose_portrait;
    let (x_regions, y_regions, side) = match level {
        0 => return Ok(vec![Region::full(width, height)]),
        1 => {
            if portrait {
                (1, 2, min_side)
            } else {
                (2, 1, min_side)
            }
        }
        2 | 3 => {
            let (xr, yr) = if level == 2 { (3, 2) } else { (2, 3) };
            let (xr, yr) = if flip { (yr, xr) } else { (xr, yr) };
            let l = level as usize;
            (xr, yr, ceil_div(2 * min_side, l + 1))
        }
        other => return Err(Error::InvalidLevel(other)),
    };

    let region_w = if side * x_regions < width {
        ceil_div(width, x_regions)
    } else {
        side
    };
    let region_h = if side * y_regions < height {
        ceil_div(height, y_regions)
    } else {
        side
    };

    let mut out = Vec::with_capacity(x_regions * y_regions);
    for j in 0..y_regions {
        let y0 = centered_offset(j, y_regions, height, region_h);
        for i in 0..x_regions {
            let x0 = centered_offset(i, x_regions, width, region_w);
            out.push(Region::new(x0, y0, region_w, region_h, level));
        }
    }
    Ok(out)
}

/// All R-MAC+ levels 0..=3, exact duplicates removed (first occurrence kept).
pub fn generate_regions_plus(width: usize, height: usize) -> Result<Vec<Region>> {
    generate_regions_plus_with(width, height, true)
}

pub fn generate_regions_plus_with(
    width: usize,
    height: usize,
    transpose_portrait: bool,
) -> Result<Vec<Region>> {
    let mut all = Vec::with_capacity(15);
    for level in 0..=3 {
        all.extend(regions_plus_for_level_with(width, height, level, transpose_portrait)?);
    }
    Ok(dedup_regions(all))
}

/// Baseline rigid grid over scales `1..=spec.levels`, duplicates removed.
pub fn generate_regions_tolias(width: usize, height: usize, spec: &GridSpec) -> Result<Vec<Region>> {
    if spec.detector != Detector::ToliasBaseline {
        return Err(Error::InvalidGrid("spec is not a tolias_baseline grid".into()));
    }
    spec.validate()?;
    check_dims(width, height)?;
    let min_side = width.min(height);
    let landscape = width >= height;
    let mut all = Vec::new();
    for level in 1..=spec.levels {
        let l = level as usize;
        let side = ceil_div(2 * min_side, l + 1);
        let long = l + spec.overlap_m as usize - 1;
        let (x_regions, y_regions) = if landscape { (long, l) } else { (l, long) };
        for j in 0..y_regions {
            let y0 = uniform_offset(j, y_regions, height, side);
            for i in 0..x_regions {
                let x0 = uniform_offset(i, x_regions, width, side);
                all.push(Region::new(x0, y0, side, side, level));
            }
        }
    }
    Ok(dedup_regions(all))
}

pub fn dedup_regions(regions: Vec<Region>) -> Vec<Region> {
    let mut out: Vec<Region> = Vec::with_capacity(regions.len());
    for r in regions {
        if !out.iter().any(|k| k.same_rect(&r)) {
            out.push(r);
        }
    }
    out
}

/// Pixel-space rectangle, `(x, y)` top-left with extent `(w, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl PixelBox {
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            x: x1,
            y: y1,
            w: x2 - x1,
            h: y2 - y1,
        }
    }
}

/// Projects a pixel bounding box onto a `map_w x map_h` feature map of an
/// image of `image_w x image_h` pixels.
pub fn project_bbox(
    bbox: &PixelBox,
    image_size: (f64, f64),
    map_size: (usize, usize),
) -> Result<Region> {
    let (image_w, image_h) = image_size;
    let (map_w, map_h) = map_size;
    check_dims(map_w, map_h)?;
    if !(image_w > 0.0 && image_h > 0.0) {
        return Err(Error::InvalidBbox(format!("image size {image_w}x{image_h}")));
    }
    let finite = [bbox.x, bbox.y, bbox.w, bbox.h].iter().all(|v| v.is_finite());
    if !finite || !(bbox.w > 0.0 && bbox.h > 0.0) {
        return Err(Error::InvalidBbox(format!("empty box {bbox:?}")));
    }
    if bbox.x < 0.0 || bbox.y < 0.0 || bbox.x + bbox.w > image_w || bbox.y + bbox.h > image_h {
        return Err(Error::InvalidBbox(format!(
            "{bbox:?} outside {image_w}x{image_h} image"
        )));
    }
    let axis = |start: f64, len: f64, img: f64, map: usize| -> (usize, usize) {
        let scale = map as f64 / img;
        let lo = ((start * scale).floor() as usize).min(map - 1);
        let hi = (((start + len) * scale).ceil() as usize).min(map).max(lo + 1);
        (lo, hi - lo)
    };
    let (x0, w) = axis(bbox.x, bbox.w, image_w, map_w);
    let (y0, h) = axis(bbox.y, bbox.h, image_h, map_h);
    Ok(Region::new(x0, y0, w, h, 0))
}

/// Text dump, one `level x0 y0 w h` line per region (tab separated).
pub fn format_region_dump(regions: &[Region]) -> String {
    let mut out = String::new();
    for r in regions {
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.level, r.x0, r.y0, r.w, r.h));
    }
    out
}

pub fn parse_region_dump(text: &str) -> std::result::Result<Vec<Region>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let v: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| format!("{line:?}: {e}")))
                .collect::<std::result::Result<_, _>>()?;
            match v.as_slice() {
                [l, x0, y0, w, h] => Ok(Region::new(*x0, *y0, *w, *h, *l as u32)),
                _ => Err(format!("{line:?}: expected 5 fields")),
            }
        })
        .collect()
}
