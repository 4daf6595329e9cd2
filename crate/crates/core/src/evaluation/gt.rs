use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::region_grid::PixelBox;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroundTruth {
    pub query_image_id: String,
    pub positives: BTreeSet<String>,
    pub junk: BTreeSet<String>,
    pub bbox: Option<PixelBox>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    /// Keyed by query id.
    pub queries: BTreeMap<String, QueryGroundTruth>,
    /// Drop the query's own image from its ranking before scoring. Set for
    /// class-list datasets where queries are not gallery members.
    pub exclude_query_image: bool,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn get(&self, query_id: &str) -> Option<&QueryGroundTruth> {
        self.queries.get(query_id)
    }

    fn check(&self) -> Result<()> {
        for (id, q) in &self.queries {
            if q.positives.is_empty() {
                return Err(Error::GroundTruth(format!("query {id:?} has no positives")));
            }
            if let Some(both) = q.positives.intersection(&q.junk).next() {
                return Err(Error::GroundTruth(format!(
                    "query {id:?}: {both:?} is both positive and junk"
                )));
            }
        }
        Ok(())
    }
}

fn read_ids(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Parses an Oxford/Paris style directory of `<name>_{query,good,ok,junk}.txt`
/// files. Query lines read `<image_id> x1 y1 x2 y2`; the Oxford `oxc1_`
/// prefix is stripped from the image id.
pub fn parse_oxford_gt(dir: impl AsRef<Path>) -> Result<GroundTruth> {
    let dir = dir.as_ref();
    let listing = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut stems = Vec::new();
    for entry in listing {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix("_query.txt") {
            stems.push(stem.to_string());
        }
    }
    if stems.is_empty() {
        return Err(Error::GroundTruth(format!("no *_query.txt files in {}", dir.display())));
    }
    stems.sort();

    let mut gt = GroundTruth::default();
    for stem in stems {
        let query_path = dir.join(format!("{stem}_query.txt"));
        let text = fs::read_to_string(&query_path).map_err(|e| Error::io(&query_path, e))?;
        let line = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::parse(&query_path, 1, "empty query file"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::parse(&query_path, 1, "expected `image_id x1 y1 x2 y2`"));
        }
        let mut coords = [0.0f64; 4];
        for (c, f) in coords.iter_mut().zip(&fields[1..]) {
            *c = f
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(&query_path, 1, format!("bad coordinate {f:?}")))?;
        }
        if coords[2] <= coords[0] || coords[3] <= coords[1] {
            return Err(Error::parse(&query_path, 1, "empty bounding box"));
        }
        let image_id = fields[0].strip_prefix("oxc1_").unwrap_or(fields[0]).to_string();

        let member = |kind: &str| -> Result<BTreeSet<String>> {
            let path = dir.join(format!("{stem}_{kind}.txt"));
            if !path.exists() {
                return Err(Error::GroundTruth(format!("missing {}", path.display())));
            }
            read_ids(&path)
        };
        let mut positives = member("good")?;
        positives.extend(member("ok")?);
        let junk = member("junk")?;
        gt.queries.insert(
            stem,
            QueryGroundTruth {
                query_image_id: image_id,
                positives,
                junk,
                bbox: Some(PixelBox::from_corners(coords[0], coords[1], coords[2], coords[3])),
            },
        );
    }
    gt.check()?;
    Ok(gt)
}

/// Parses `image_id<TAB>class_id<TAB>{query|db}` lines (Holidays layout).
/// Each query's positives are the database members of its class.
pub fn parse_classlist_gt(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut queries: Vec<(String, String)> = Vec::new();
    let mut members: HashMap<String, BTreeSet<String>> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, i + 1, "expected image_id, class_id, role"));
        }
        let (id, class) = (fields[0].to_string(), fields[1].to_string());
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        match fields[2] {
            "query" => queries.push((id, class)),
            "db" => {
                members.entry(class).or_default().insert(id);
            }
            other => return Err(Error::parse(path, i + 1, format!("unknown role {other:?}"))),
        }
    }
    let mut gt = GroundTruth {
        exclude_query_image: true,
        ..Default::default()
    };
    for (id, class) in queries {
        let positives = members.get(&class).cloned().unwrap_or_default();
        if positives.is_empty() {
            return Err(Error::GroundTruth(format!(
                "class {class:?} has query {id:?} but no database members"
            )));
        }
        gt.queries.insert(
            id.clone(),
            QueryGroundTruth {
                query_image_id: id,
                positives,
                junk: BTreeSet::new(),
                bbox: None,
            },
        );
    }
    gt.check()?;
    Ok(gt)
}
