//! Deterministic synthetic feature-map datasets.
//!
//! Each class owns a block of channels. A gallery image carries its class
//! signature in a small patch placed inside one of the finest-level
//! detector regions; the rest of the map holds low background noise and
//! clutter blobs whose channel patterns are random mixtures over all
//! channels. Queries are object-only maps, as if already cropped to the
//! object's bounding box.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::{GroundTruth, QueryGroundTruth};
use crate::region_grid::{regions_plus_for_level, Region};
use crate::tensor_store::{
    write_feature_map, FeatureMap, FeatureSetManifest, ImageFeatures, ManifestEntry, ResolutionMode, ResolutionTag,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub images_per_class: usize,
    pub queries_per_class: usize,
    pub width: usize,
    pub height: usize,
    /// Channels per class block; total channels = classes * block + block.
    pub class_block: usize,
    pub patch_w: usize,
    pub patch_h: usize,
    pub clutter_blobs: usize,
    pub clutter_strength: f32,
    pub background: f32,
    pub multiresolution: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            images_per_class: 10,
            queries_per_class: 2,
            width: 24,
            height: 18,
            class_block: 8,
            patch_w: 8,
            patch_h: 9,
            clutter_blobs: 4,
            clutter_strength: 1.0,
            background: 0.1,
            multiresolution: false,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn channels(&self) -> usize {
        (self.classes + 1) * self.class_block
    }

    pub fn mode(&self) -> ResolutionMode {
        if self.multiresolution {
            ResolutionMode::Multi
        } else {
            ResolutionMode::Single
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub image_id: String,
    pub class: usize,
    /// Where the class signal sits on the base map (gallery images only).
    pub patch: Option<Region>,
    pub maps: Vec<(ResolutionTag, FeatureMap)>,
}

impl SyntheticImage {
    pub fn features(&self) -> ImageFeatures {
        ImageFeatures {
            image_id: self.image_id.clone(),
            maps: self.maps.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub gallery: Vec<SyntheticImage>,
    pub queries: Vec<SyntheticImage>,
}

/// Nearest-neighbour resampling standing in for extraction on a resized image.
fn resample(map: &FeatureMap, width: usize, height: usize) -> FeatureMap {
    let (sw, sh) = (map.width(), map.height());
    FeatureMap::from_fn(width, height, map.channels(), |y, x, d| {
        let sx = ((x * sw) / width).min(sw - 1);
        let sy = ((y * sh) / height).min(sh - 1);
        map.get(sy, sx, d)
    })
    .expect("resampled map has positive dims")
}

fn resolutions(base: FeatureMap, multires: bool) -> Vec<(ResolutionTag, FeatureMap)> {
    if !multires {
        return vec![(ResolutionTag::Base, base)];
    }
    let scaled = |s: f64| {
        let w = ((base.width() as f64 * s).round() as usize).max(1);
        let h = ((base.height() as f64 * s).round() as usize).max(1);
        resample(&base, w, h)
    };
    let up = scaled(ResolutionTag::Up25.scale());
    let down = scaled(ResolutionTag::Down25.scale());
    vec![
        (ResolutionTag::Base, base),
        (ResolutionTag::Up25, up),
        (ResolutionTag::Down25, down),
    ]
}

fn signature(cfg: &SyntheticConfig, class: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut v = vec![0.0f32; cfg.channels()];
    for x in &mut v[class * cfg.class_block..(class + 1) * cfg.class_block] {
        *x = rng.gen_range(0.5..1.0);
    }
    v
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    let area = cfg.width * cfg.height;
    if cfg.classes == 0 || cfg.images_per_class == 0 || cfg.class_block == 0 {
        return Err(Error::InvalidShape("synthetic dataset needs classes, images and channels".into()));
    }
    let finest = regions_plus_for_level(cfg.width, cfg.height, 3)?;
    if !finest.iter().all(|r| r.w >= cfg.patch_w && r.h >= cfg.patch_h) || cfg.patch_w == 0 || cfg.patch_h == 0 {
        return Err(Error::InvalidShape(format!(
            "patch {}x{} does not fit the finest regions of a {}x{} map",
            cfg.patch_w, cfg.patch_h, cfg.width, cfg.height
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let channels = cfg.channels();
    let signatures: Vec<Vec<f32>> = (0..cfg.classes).map(|c| signature(cfg, c, &mut rng)).collect();

    let mut gallery = Vec::with_capacity(cfg.classes * cfg.images_per_class);
    for i in 0..cfg.classes * cfg.images_per_class {
        let class = i % cfg.classes;
        let host = *finest.choose(&mut rng).unwrap();
        let px = host.x0 + rng.gen_range(0..=host.w - cfg.patch_w);
        let py = host.y0 + rng.gen_range(0..=host.h - cfg.patch_h);
        let patch = Region::new(px, py, cfg.patch_w, cfg.patch_h, 3);

        let mut data: Vec<f32> = (0..area * channels).map(|_| rng.gen_range(0.0..cfg.background)).collect();
        for _ in 0..cfg.clutter_blobs {
            let pattern: Vec<f32> = (0..channels)
                .map(|_| rng.gen_range(0.0..cfg.clutter_strength))
                .collect();
            let bw = rng.gen_range(2..=cfg.patch_w.max(2));
            let bh = rng.gen_range(2..=cfg.patch_h.max(2));
            let bx = rng.gen_range(0..=cfg.width.saturating_sub(bw));
            let by = rng.gen_range(0..=cfg.height.saturating_sub(bh));
            for y in by..(by + bh).min(cfg.height) {
                for x in bx..(bx + bw).min(cfg.width) {
                    if host.contains(x, y) {
                        continue;
                    }
                    let cell = &mut data[(y * cfg.width + x) * channels..][..channels];
                    for (c, &p) in cell.iter_mut().zip(&pattern) {
                        *c = c.max(p * rng.gen_range(0.8..1.0));
                    }
                }
            }
        }
        for y in py..py + cfg.patch_h {
            for x in px..px + cfg.patch_w {
                let cell = &mut data[(y * cfg.width + x) * channels..][..channels];
                for (c, &s) in cell.iter_mut().zip(&signatures[class]) {
                    *c = c.max(s * rng.gen_range(0.8..1.0));
                }
            }
        }
        let base = FeatureMap::new(cfg.width, cfg.height, channels, data)?;
        gallery.push(SyntheticImage {
            image_id: format!("c{class}_g{i:03}"),
            class,
            patch: Some(patch),
            maps: resolutions(base, cfg.multiresolution),
        });
    }

    let mut queries = Vec::with_capacity(cfg.classes * cfg.queries_per_class);
    for i in 0..cfg.classes * cfg.queries_per_class {
        let class = i % cfg.classes;
        let base = FeatureMap::from_fn(cfg.patch_w, cfg.patch_h, channels, |_, _, d| {
            let noise = rng.gen_range(0.0..cfg.background);
            noise.max(signatures[class][d] * rng.gen_range(0.8..1.0))
        })?;
        queries.push(SyntheticImage {
            image_id: format!("c{class}_q{i:03}"),
            class,
            patch: None,
            maps: resolutions(base, cfg.multiresolution),
        });
    }

    Ok(SyntheticDataset {
        config: cfg.clone(),
        gallery,
        queries,
    })
}

impl SyntheticDataset {
    /// Writes feature maps plus `gallery.tsv`, `queries.tsv` and a
    /// class-list ground truth `gt.tsv` under `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let maps_dir = dir.join("maps");
        fs::create_dir_all(&maps_dir).map_err(|e| Error::io(&maps_dir, e))?;
        let write_set = |images: &[SyntheticImage], name: &str| -> Result<()> {
            let mut manifest = FeatureSetManifest::new(format!("synthetic-{name}"), dir);
            for img in images {
                for (tag, map) in &img.maps {
                    let rel = format!("maps/{}_{}.fmap", img.image_id, tag);
                    write_feature_map(map, dir.join(&rel))?;
                    manifest.push(ManifestEntry {
                        image_id: img.image_id.clone(),
                        tag: *tag,
                        file_path: rel,
                        width: map.width(),
                        height: map.height(),
                        channels: map.channels(),
                    })?;
                }
            }
            manifest.write(dir.join(format!("{name}.tsv")))
        };
        write_set(&self.gallery, "gallery")?;
        write_set(&self.queries, "queries")?;

        let mut gt = String::new();
        for img in &self.queries {
            gt.push_str(&format!("{}\t{}\tquery\n", img.image_id, img.class));
        }
        for img in &self.gallery {
            gt.push_str(&format!("{}\t{}\tdb\n", img.image_id, img.class));
        }
        crate::io_util::write_atomic(&dir.join("gt.tsv"), gt.as_bytes())
    }

    /// Class-list ground truth matching [`SyntheticDataset::write_to`].
    pub fn ground_truth(&self) -> GroundTruth {
        let mut gt = GroundTruth {
            exclude_query_image: true,
            ..Default::default()
        };
        for q in &self.queries {
            let positives = self
                .gallery
                .iter()
                .filter(|g| g.class == q.class)
                .map(|g| g.image_id.clone())
                .collect();
            gt.queries.insert(
                q.image_id.clone(),
                QueryGroundTruth {
                    query_image_id: q.image_id.clone(),
                    positives,
                    junk: Default::default(),
                    bbox: None,
                },
            );
        }
        gt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.gallery.len(), 30);
        assert_eq!(a.queries.len(), 6);
        for (x, y) in a.gallery.iter().zip(&b.gallery) {
            assert_eq!(x.maps[0].1, y.maps[0].1);
        }
    }

    #[test]
    fn patch_is_small_and_inside_a_finest_region() {
        let cfg = SyntheticConfig::default();
        assert!(cfg.patch_w * cfg.patch_h * 6 <= cfg.width * cfg.height);
        let finest = regions_plus_for_level(cfg.width, cfg.height, 3).unwrap();
        for img in generate(&cfg).unwrap().gallery {
            let p = img.patch.unwrap();
            assert!(finest.iter().any(|r| r.x0 <= p.x0
                && r.y0 <= p.y0
                && p.x0 + p.w <= r.x0 + r.w
                && p.y0 + p.h <= r.y0 + r.h));
        }
    }

    #[test]
    fn multires_sizes() {
        let cfg = SyntheticConfig {
            multiresolution: true,
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        let dims: Vec<_> = ds.gallery[0].maps.iter().map(|(_, m)| (m.width(), m.height())).collect();
        assert_eq!(dims, vec![(24, 18), (30, 23), (18, 14)]);
    }
}
