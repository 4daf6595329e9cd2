//! Line-oriented manifest listing the feature-map files of a dataset.
//!
//! One record per line, tab separated:
//! `image_id  resolution_tag  relative_file_path  W  H  D`.
//! Lines starting with `#` are comments; a `# dataset: <name>` comment names
//! the dataset. Relative paths resolve against the manifest's directory.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{read_feature_map, FeatureMap};
use crate::error::{Error, Result};
use crate::io_util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResolutionTag {
    Base,
    Up25,
    Down25,
}

impl ResolutionTag {
    pub const ALL: [ResolutionTag; 3] = [ResolutionTag::Base, ResolutionTag::Up25, ResolutionTag::Down25];

    pub fn as_str(self) -> &'static str {
        match self {
            ResolutionTag::Base => "base",
            ResolutionTag::Up25 => "up25",
            ResolutionTag::Down25 => "down25",
        }
    }

    /// Scale factor applied to the largest image side.
    pub fn scale(self) -> f64 {
        match self {
            ResolutionTag::Base => 1.0,
            ResolutionTag::Up25 => 1.25,
            ResolutionTag::Down25 => 0.75,
        }
    }
}

impl fmt::Display for ResolutionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResolutionTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(ResolutionTag::Base),
            "up25" => Ok(ResolutionTag::Up25),
            "down25" => Ok(ResolutionTag::Down25),
            other => Err(format!("unknown resolution tag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResolutionMode {
    Single,
    Multi,
}

impl ResolutionMode {
    pub fn tags(self) -> &'static [ResolutionTag] {
        match self {
            ResolutionMode::Single => &ResolutionTag::ALL[..1],
            ResolutionMode::Multi => &ResolutionTag::ALL,
        }
    }

    pub fn is_multi(self) -> bool {
        self == ResolutionMode::Multi
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub tag: ResolutionTag,
    pub file_path: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSetManifest {
    pub dataset_name: String,
    pub entries: Vec<ManifestEntry>,
    base_dir: PathBuf,
}

/// All loaded resolutions of one image, ordered base, up25, down25.
#[derive(Debug, Clone)]
pub struct ImageFeatures {
    pub image_id: String,
    pub maps: Vec<(ResolutionTag, FeatureMap)>,
}

impl FeatureSetManifest {
    pub fn new(dataset_name: impl Into<String>, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset_name: dataset_name.into(),
            entries: Vec::new(),
            base_dir: base_dir.into(),
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn push(&mut self, entry: ManifestEntry) -> Result<()> {
        if self
            .entries
            .iter()
            .any(|e| e.image_id == entry.image_id && e.tag == entry.tag)
        {
            return Err(Error::DuplicateId(format!("{}/{}", entry.image_id, entry.tag)));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let default_name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, path, base_dir, default_name)
    }

    fn parse(text: &str, path: &Path, base_dir: PathBuf, default_name: String) -> Result<Self> {
        let mut manifest = Self::new(default_name, base_dir);
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(name) = comment.trim().strip_prefix("dataset:") {
                    manifest.dataset_name = name.trim().to_string();
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 6 tab-separated fields, found {}", fields.len()),
                ));
            }
            let tag: ResolutionTag = fields[1].parse().map_err(|m| Error::parse(path, lineno, m))?;
            let dim = |s: &str, name: &str| -> Result<usize> {
                match s.trim().parse::<usize>() {
                    Ok(v) if v > 0 => Ok(v),
                    _ => Err(Error::parse(path, lineno, format!("invalid {name} {s:?}"))),
                }
            };
            let entry = ManifestEntry {
                image_id: fields[0].to_string(),
                tag,
                file_path: fields[2].to_string(),
                width: dim(fields[3], "W")?,
                height: dim(fields[4], "H")?,
                channels: dim(fields[5], "D")?,
            };
            if entry.image_id.is_empty() {
                return Err(Error::parse(path, lineno, "empty image id"));
            }
            if !seen.insert((entry.image_id.clone(), tag)) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("duplicate entry {}/{}", entry.image_id, tag),
                ));
            }
            manifest.entries.push(entry);
        }
        Ok(manifest)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# dataset: {}\n", self.dataset_name);
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                e.image_id, e.tag, e.file_path, e.width, e.height, e.channels
            ));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        io_util::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }

    /// Image ids in order of first appearance.
    pub fn image_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.image_id.as_str()))
            .map(|e| e.image_id.as_str())
            .collect()
    }

    pub fn entries_for<'a>(&'a self, image_id: &'a str) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.entries.iter().filter(move |e| e.image_id == image_id)
    }

    /// Checks that every image carries the resolutions `mode` needs and that
    /// the channel count is uniform. Extra tags in single mode are ignored.
    pub fn validate(&self, mode: ResolutionMode) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Empty("manifest has no entries"));
        }
        let channels = self.entries[0].channels;
        let mut tags: HashMap<&str, Vec<ResolutionTag>> = HashMap::new();
        for e in &self.entries {
            if e.channels != channels {
                return Err(Error::DimensionMismatch {
                    expected: channels,
                    actual: e.channels,
                });
            }
            tags.entry(e.image_id.as_str()).or_default().push(e.tag);
        }
        for id in self.image_ids() {
            let have = &tags[id];
            for tag in mode.tags() {
                if !have.contains(tag) {
                    return Err(Error::Resolution {
                        image_id: id.to_string(),
                        message: format!("missing resolution {tag}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn channels(&self) -> Option<usize> {
        self.entries.first().map(|e| e.channels)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.file_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Reads the feature maps `mode` needs for one image and checks them
    /// against the manifest's declared dimensions.
    pub fn load_image(&self, image_id: &str, mode: ResolutionMode) -> Result<ImageFeatures> {
        let mut maps = Vec::with_capacity(mode.tags().len());
        for &tag in mode.tags() {
            let entry = self
                .entries_for(image_id)
                .find(|e| e.tag == tag)
                .ok_or_else(|| Error::Resolution {
                    image_id: image_id.to_string(),
                    message: format!("missing resolution {tag}"),
                })?;
            let map = read_feature_map(self.resolve(entry))?;
            if (map.width(), map.height(), map.channels()) != (entry.width, entry.height, entry.channels) {
                return Err(Error::Resolution {
                    image_id: image_id.to_string(),
                    message: format!(
                        "{tag}: file is {}x{}x{}, manifest declares {}x{}x{}",
                        map.width(),
                        map.height(),
                        map.channels(),
                        entry.width,
                        entry.height,
                        entry.channels
                    ),
                });
            }
            maps.push((tag, map));
        }
        Ok(ImageFeatures {
            image_id: image_id.to_string(),
            maps,
        })
    }
}
