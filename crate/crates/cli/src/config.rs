//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory of the config file. Command-line flags
//! override file values.

use std::fs;
use std::path::{Path, PathBuf};

use rmac_core::region_grid::{Detector, GridSpec};
use rmac_core::retrieval::{QeVariant, RetrievalMode};
use rmac_core::tensor_store::ResolutionMode;

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WhiteningSource {
    /// Fit on the gallery (or `whitening_manifest`) region descriptors.
    SelfFit,
    /// Load a previously fitted model file.
    External(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtFormat {
    Oxford,
    ClassList,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub detector: Detector,
    pub tolias_levels: u32,
    pub tolias_m: u32,
    pub transpose_portrait: bool,
    pub multires: bool,
    pub retrieval: RetrievalMode,
    pub whitening: WhiteningSource,
    pub whitening_manifest: Option<PathBuf>,
    pub qe: Option<QeVariant>,
    /// Defaults per dataset name when unset (8 Oxford, 6 Paris, 1 otherwise).
    pub qe_k: Option<usize>,
    pub gallery_manifest: Option<PathBuf>,
    pub query_manifest: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub gt_format: GtFormat,
    pub image_sizes: Option<PathBuf>,
    pub crop_queries: bool,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detector: Detector::RmacPlus,
            tolias_levels: 3,
            tolias_m: 2,
            transpose_portrait: true,
            multires: true,
            retrieval: RetrievalMode::DbRegions,
            whitening: WhiteningSource::SelfFit,
            whitening_manifest: None,
            qe: None,
            qe_k: None,
            gallery_manifest: None,
            query_manifest: None,
            gt: None,
            gt_format: GtFormat::Oxford,
            image_sizes: None,
            crop_queries: true,
            output_dir: PathBuf::from("out"),
            jobs: 0,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config_err(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| config_err(format!("{key}: expected a number, got {v:?}")))
}

pub fn parse_qe(v: &str) -> CliResult<Option<QeVariant>> {
    if v == "off" || v == "none" {
        return Ok(None);
    }
    v.parse().map(Some).map_err(config_err)
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim(), base_dir)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str, base_dir: &Path) -> CliResult<()> {
        let path = || -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        match key {
            "detector" => self.detector = v.parse().map_err(config_err)?,
            "tolias_levels" => self.tolias_levels = parse_num(key, v)?,
            "tolias_m" => self.tolias_m = parse_num(key, v)?,
            "transpose_portrait" => self.transpose_portrait = parse_bool(key, v)?,
            "multires" => self.multires = parse_bool(key, v)?,
            "retrieval" => self.retrieval = v.parse().map_err(config_err)?,
            "whitening" => {
                self.whitening = if v == "self" {
                    WhiteningSource::SelfFit
                } else {
                    WhiteningSource::External(path())
                }
            }
            "whitening_manifest" => self.whitening_manifest = Some(path()),
            "qe" => self.qe = parse_qe(v)?,
            "qe_k" => self.qe_k = Some(parse_num(key, v)?),
            "gallery_manifest" => self.gallery_manifest = Some(path()),
            "query_manifest" => self.query_manifest = Some(path()),
            "gt" => self.gt = Some(path()),
            "gt_format" => {
                self.gt_format = match v {
                    "oxford" | "paris" => GtFormat::Oxford,
                    "classlist" | "holidays" => GtFormat::ClassList,
                    _ => return Err(config_err(format!("gt_format: unknown format {v:?}"))),
                }
            }
            "image_sizes" => self.image_sizes = Some(path()),
            "crop_queries" => self.crop_queries = parse_bool(key, v)?,
            "output_dir" => self.output_dir = path(),
            "jobs" => self.jobs = parse_num(key, v)?,
            other => return Err(config_err(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("detector", self.detector.to_string());
        put("tolias_levels", self.tolias_levels.to_string());
        put("tolias_m", self.tolias_m.to_string());
        put("transpose_portrait", self.transpose_portrait.to_string());
        put("multires", self.multires.to_string());
        put("retrieval", self.retrieval.to_string());
        put(
            "whitening",
            match &self.whitening {
                WhiteningSource::SelfFit => "self".to_string(),
                WhiteningSource::External(p) => p.display().to_string(),
            },
        );
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        if let Some(p) = opt(&self.whitening_manifest) {
            put("whitening_manifest", p);
        }
        put("qe", self.qe.map_or("off".to_string(), |q| q.to_string()));
        if let Some(k) = self.qe_k {
            put("qe_k", k.to_string());
        }
        for (k, v) in [
            ("gallery_manifest", &self.gallery_manifest),
            ("query_manifest", &self.query_manifest),
            ("gt", &self.gt),
        ] {
            if let Some(p) = opt(v) {
                put(k, p);
            }
        }
        put(
            "gt_format",
            match self.gt_format {
                GtFormat::Oxford => "oxford",
                GtFormat::ClassList => "classlist",
            }
            .to_string(),
        );
        if let Some(p) = opt(&self.image_sizes) {
            put("image_sizes", p);
        }
        put("crop_queries", self.crop_queries.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("jobs", self.jobs.to_string());
        out
    }

    pub fn grid(&self) -> GridSpec {
        match self.detector {
            Detector::RmacPlus => GridSpec {
                transpose_portrait: self.transpose_portrait,
                ..GridSpec::rmac_plus()
            },
            Detector::ToliasBaseline => GridSpec::tolias(self.tolias_levels, self.tolias_m),
        }
    }

    pub fn mode(&self) -> ResolutionMode {
        if self.multires {
            ResolutionMode::Multi
        } else {
            ResolutionMode::Single
        }
    }

    pub fn whitening_path(&self) -> PathBuf {
        match &self.whitening {
            WhiteningSource::SelfFit => self.output_dir.join("whitening.whtn"),
            WhiteningSource::External(p) => p.clone(),
        }
    }

    pub fn index_path(&self) -> PathBuf {
        self.output_dir.join("index.ridx")
    }

    pub fn rankings_dir(&self) -> PathBuf {
        self.output_dir.join("rankings")
    }

    /// Query-expansion depth: explicit `qe_k`, else the per-dataset default.
    pub fn resolved_qe_k(&self, dataset_name: &str) -> usize {
        self.qe_k.unwrap_or_else(|| default_qe_k(dataset_name))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.grid()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if self.qe_k == Some(0) {
            return Err(config_err("qe_k must be at least 1"));
        }
        for (name, p) in [
            ("gallery_manifest", &self.gallery_manifest),
            ("query_manifest", &self.query_manifest),
            ("gt", &self.gt),
            ("image_sizes", &self.image_sizes),
            ("whitening_manifest", &self.whitening_manifest),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(config_err(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        if let WhiteningSource::External(p) = &self.whitening {
            if !p.exists() {
                return Err(config_err(format!("whitening: {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, name: &str, value: &'a Option<PathBuf>) -> CliResult<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| config_err(format!("{name} is not set")))
    }
}

/// Top-k used for query expansion when the config leaves it open.
pub fn default_qe_k(dataset_name: &str) -> usize {
    let name = dataset_name.to_ascii_lowercase();
    if name.contains("oxford") {
        8
    } else if name.contains("paris") {
        6
    } else {
        1
    }
}
