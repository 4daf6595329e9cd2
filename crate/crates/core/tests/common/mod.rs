//! Independent reference implementations used as test oracles. They follow
//! the definitions directly (floating-point geometry, naive loops) and share
//! no code with the library beyond its data types.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rmac_core::{build_index, Descriptor, Detector, GalleryIndex, ImageDescriptors, NormState};

/// `(level, x0, y0, w, h)` rectangles.
pub type Rect = (u32, usize, usize, usize, usize);

/// Region grid recomputed from the level table in floating point.
pub fn oracle_regions_plus(w: usize, h: usize) -> Vec<Rect> {
    let min = w.min(h) as f64;
    let mut out: Vec<Rect> = vec![(0, 0, 0, w, h)];
    for level in 1..=3u32 {
        let (mut nx, mut ny, side) = match level {
            1 => (2, 1, min),
            2 => (3, 2, (2.0 / 3.0 * min).ceil()),
            _ => (2, 3, (0.5 * min).ceil()),
        };
        if w < h {
            std::mem::swap(&mut nx, &mut ny);
        }
        let side = side as usize;
        let rw = if side * nx < w { (w as f64 / nx as f64).ceil() as usize } else { side };
        let rh = if side * ny < h { (h as f64 / ny as f64).ceil() as usize } else { side };
        for j in 0..ny {
            for i in 0..nx {
                let x0 = place(i, nx, w, rw);
                let y0 = place(j, ny, h, rh);
                out.push((level, x0, y0, rw, rh));
            }
        }
    }
    dedup(out)
}

fn place(i: usize, n: usize, extent: usize, size: usize) -> usize {
    let centre = (i as f64 + 0.5) * extent as f64 / n as f64;
    // Exact values are multiples of 1/(2n); the nudge only absorbs
    // representation error before rounding half up.
    let corner = (centre - size as f64 / 2.0 + 0.5 + 1e-9).floor();
    corner.max(0.0).min((extent - size) as f64) as usize
}

fn dedup(rects: Vec<Rect>) -> Vec<Rect> {
    let mut out: Vec<Rect> = Vec::new();
    for r in rects {
        if !out.iter().any(|o| (o.1, o.2, o.3, o.4) == (r.1, r.2, r.3, r.4)) {
            out.push(r);
        }
    }
    out
}

pub fn squared(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        s += d * d;
    }
    s
}

/// Naive ranking: `(image_id, distance, best region row)` sorted by
/// distance then id.
pub fn oracle_rank(
    query: &[f32],
    ids: &[String],
    rmac: &[Vec<f32>],
    regions: &[Vec<Vec<f32>>],
    db_regions: bool,
) -> Vec<(String, f64, Option<usize>)> {
    let mut rows = Vec::new();
    let mut row_base = 0;
    for n in 0..ids.len() {
        if db_regions {
            let mut best = None::<(usize, f64)>;
            for (r, region) in regions[n].iter().enumerate() {
                let d = squared(query, region);
                match best {
                    Some((_, bd)) if bd <= d => {}
                    _ => best = Some((row_base + r, d)),
                }
            }
            let (row, d) = best.unwrap();
            rows.push((ids[n].clone(), d, Some(row)));
        } else {
            rows.push((ids[n].clone(), squared(query, &rmac[n]), None));
        }
        row_base += regions[n].len();
    }
    rows.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    rows.into_iter().map(|(id, d, row)| (id, d.sqrt(), row)).collect()
}

/// AP straight from the definition over a filtered id list.
pub fn oracle_ap(ranking: &[&str], positives: &BTreeSet<String>, junk: &BTreeSet<String>) -> f64 {
    let filtered: Vec<&str> = ranking.iter().copied().filter(|id| !junk.contains(*id)).collect();
    let mut total = 0.0;
    for p in positives {
        if let Some(pos) = filtered.iter().position(|id| id == p) {
            let hits_up_to = filtered[..=pos].iter().filter(|id| positives.contains(**id)).count();
            total += hits_up_to as f64 / (pos + 1) as f64;
        }
    }
    total / positives.len() as f64
}

pub struct RawGallery {
    pub ids: Vec<String>,
    pub rmac: Vec<Vec<f32>>,
    pub regions: Vec<Vec<Vec<f32>>>,
}

impl RawGallery {
    pub fn index(&self) -> GalleryIndex {
        let descs: Vec<ImageDescriptors> = (0..self.ids.len())
            .map(|n| ImageDescriptors {
                image_id: self.ids[n].clone(),
                resolutions: if self.regions[n].len() == 45 { 3 } else { 1 },
                rmac_plus: Descriptor::new(self.rmac[n].clone(), NormState::WhitenedNormalized),
                db_regions: self.regions[n]
                    .iter()
                    .map(|r| Descriptor::new(r.clone(), NormState::WhitenedNormalized))
                    .collect(),
            })
            .collect();
        build_index(&descs, Detector::RmacPlus, [0; 32]).unwrap()
    }
}

/// Random gallery. With `coarse`, values are drawn from a small grid so
/// exact distance ties are common.
pub fn random_gallery(rng: &mut impl Rng, n: usize, dim: usize, regions: usize, coarse: bool) -> RawGallery {
    // Ids are permuted relative to index order so id tie-breaks are exercised.
    let ids = (0..n).map(|i| format!("img{:05}", (i * 7919) % 10007)).collect();
    let rmac = (0..n).map(|_| random_vector(rng, dim, coarse)).collect();
    let regions = (0..n)
        .map(|_| (0..regions).map(|_| random_vector(rng, dim, coarse)).collect())
        .collect();
    RawGallery { ids, rmac, regions }
}

pub fn random_vector(rng: &mut impl Rng, dim: usize, coarse: bool) -> Vec<f32> {
    (0..dim)
        .map(|_| {
            if coarse {
                rng.gen_range(-2i32..=2) as f32 * 0.25
            } else {
                rng.gen_range(-1.0f32..1.0)
            }
        })
        .collect()
}
