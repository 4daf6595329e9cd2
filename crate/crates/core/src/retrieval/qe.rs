//! Average query expansion: the query plus the top-k retrieved descriptors,
//! summed and re-normalized. One round only.

use std::fmt;
use std::str::FromStr;

use super::rank::{best_region, squared_l2};
use super::{GalleryIndex, RankedList};
use crate::descriptor::{normalize_f64, Descriptor, NormState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QeVariant {
    /// Top-k gallery R-MAC+ descriptors.
    Rmac,
    /// Nearest region of each of the top-k images.
    DbRegions,
    /// The k nearest region rows over the whole gallery.
    DbRegionsGlobal,
}

impl QeVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            QeVariant::Rmac => "rmac",
            QeVariant::DbRegions => "db_regions",
            QeVariant::DbRegionsGlobal => "db_regions_global",
        }
    }
}

impl FromStr for QeVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rmac" | "rmac_qe" => Ok(QeVariant::Rmac),
            "db_regions" | "db_region_qe" => Ok(QeVariant::DbRegions),
            "db_regions_global" => Ok(QeVariant::DbRegionsGlobal),
            other => Err(format!("unknown query expansion variant {other:?}")),
        }
    }
}

impl fmt::Display for QeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Builds the expanded query from `ranked`. `k` larger than the gallery is
/// clamped with a warning.
pub fn expand_query(
    query: &Descriptor,
    ranked: &RankedList,
    index: &GalleryIndex,
    k: usize,
    variant: QeVariant,
) -> Result<Descriptor> {
    if k == 0 {
        return Err(Error::InvalidShape("query expansion needs k >= 1".into()));
    }
    if ranked.entries.is_empty() {
        return Err(Error::Empty("ranked list is empty"));
    }
    if query.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            actual: query.dim(),
        });
    }
    let limit = match variant {
        QeVariant::DbRegionsGlobal => index.total_regions(),
        _ => ranked.entries.len(),
    };
    let k = if k > limit {
        log::warn!("query {:?}: qe k={k} exceeds {limit} candidates, clamping", ranked.query_id);
        limit
    } else {
        k
    };

    let mut acc: Vec<f64> = query.values.iter().map(|&v| v as f64).collect();
    let mut add = |row: &[f32]| {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v as f64;
        }
    };

    match variant {
        QeVariant::Rmac | QeVariant::DbRegions => {
            for entry in &ranked.entries[..k] {
                let image = index
                    .image_position(&entry.image_id)
                    .ok_or_else(|| Error::Index(format!("unknown image {:?}", entry.image_id)))?;
                if variant == QeVariant::Rmac {
                    add(index.rmac_row(image));
                } else {
                    let row = match entry.best_region_row {
                        Some(row) if index.region_range(image).contains(&row) => row,
                        _ => best_region(&query.values, index, image).0,
                    };
                    add(index.region_row(row));
                }
            }
        }
        QeVariant::DbRegionsGlobal => {
            let mut rows: Vec<(f64, usize)> = (0..index.total_regions())
                .map(|r| (squared_l2(&query.values, index.region_row(r)), r))
                .collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, r) in &rows[..k] {
                add(index.region_row(r));
            }
        }
    }
    Ok(Descriptor::new(normalize_f64(&acc), NormState::WhitenedNormalized))
}
