//! Exhaustive L2 ranking of a gallery against one query.
//!
//! Distances are accumulated as squared L2 in `f64`, left to right over the
//! dimensions, and square-rooted only when reported. Ties are broken by
//! image id so that rankings are fully deterministic.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::GalleryIndex;
use crate::descriptor::Descriptor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMode {
    /// One R-MAC+ per gallery image.
    Plain,
    /// Minimum distance over each gallery image's region descriptors.
    DbRegions,
}

impl RetrievalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RetrievalMode::Plain => "plain",
            RetrievalMode::DbRegions => "db_regions",
        }
    }

    pub fn rank(self, query_id: &str, query: &Descriptor, index: &GalleryIndex) -> Result<RankedList> {
        let mut ranked = match self {
            RetrievalMode::Plain => rank_plain(query, index)?,
            RetrievalMode::DbRegions => rank_db_regions(query, index)?,
        };
        ranked.query_id = query_id.to_string();
        Ok(ranked)
    }
}

impl FromStr for RetrievalMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "plain" => Ok(RetrievalMode::Plain),
            "db_regions" => Ok(RetrievalMode::DbRegions),
            other => Err(format!("unknown retrieval mode {other:?}")),
        }
    }
}

impl fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub image_id: String,
    /// L2 distance to the query.
    pub score: f64,
    /// Global region row that achieved the score (db-regions mode).
    pub best_region_row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.image_id.as_str())
    }

    /// `rank<TAB>image_id<TAB>distance` lines, ranks starting at 1.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 32);
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{:.6}\n", i + 1, e.image_id, e.score));
        }
        out
    }

    pub fn from_text(query_id: &str, text: &str) -> std::result::Result<Self, String> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(format!("line {}: expected 3 fields", lineno + 1));
            }
            let rank: usize = fields[0]
                .parse()
                .map_err(|_| format!("line {}: bad rank {:?}", lineno + 1, fields[0]))?;
            if rank != entries.len() + 1 {
                return Err(format!("line {}: rank {rank} out of sequence", lineno + 1));
            }
            let score: f64 = fields[2]
                .parse()
                .map_err(|_| format!("line {}: bad distance {:?}", lineno + 1, fields[2]))?;
            entries.push(RankedEntry {
                image_id: fields[1].to_string(),
                score,
                best_region_row: None,
            });
        }
        Ok(Self {
            query_id: query_id.to_string(),
            entries,
        })
    }
}

pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    acc
}

fn check_dim(query: &Descriptor, index: &GalleryIndex) -> Result<()> {
    if query.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            actual: query.dim(),
        });
    }
    Ok(())
}

fn sorted(index: &GalleryIndex, scored: Vec<(usize, f64, Option<usize>)>) -> RankedList {
    let mut scored = scored;
    let ids = index.image_ids();
    scored.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| ids[a.0].cmp(&ids[b.0]))
            .then(Ordering::Equal)
    });
    RankedList {
        query_id: String::new(),
        entries: scored
            .into_iter()
            .map(|(i, sq, row)| RankedEntry {
                image_id: ids[i].clone(),
                score: sq.sqrt(),
                best_region_row: row,
            })
            .collect(),
    }
}

pub fn rank_plain(query: &Descriptor, index: &GalleryIndex) -> Result<RankedList> {
    check_dim(query, index)?;
    let scored = (0..index.len())
        .into_par_iter()
        .map(|i| (i, squared_l2(&query.values, index.rmac_row(i)), None))
        .collect();
    Ok(sorted(index, scored))
}

/// Nearest region of `image` to `query`: `(global row, squared distance)`.
/// The first row wins among equal distances.
pub(crate) fn best_region(query: &[f32], index: &GalleryIndex, image: usize) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for row in index.region_range(image) {
        let d = squared_l2(query, index.region_row(row));
        if d < best.1 || best.0 == usize::MAX {
            best = (row, d);
        }
    }
    best
}

pub fn rank_db_regions(query: &Descriptor, index: &GalleryIndex) -> Result<RankedList> {
    check_dim(query, index)?;
    let scored = (0..index.len())
        .into_par_iter()
        .map(|i| {
            let (row, d) = best_region(&query.values, index, i);
            (i, d, Some(row))
        })
        .collect();
    Ok(sorted(index, scored))
}
