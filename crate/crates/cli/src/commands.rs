//! Subcommand implementations. Every file written here goes through
//! [`write_atomic`], so an interrupted run leaves no partial outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use rmac_core::descriptor::{region_macs, DEFAULT_EPSILON};
use rmac_core::synthetic::{self, SyntheticConfig};
use rmac_core::{
    build_index, compute_image_descriptors, expand_query, mean_average_precision, parse_classlist_gt,
    parse_oxford_gt, write_atomic, CropSpec, EvaluationReport, FeatureSetManifest, GalleryIndex, GroundTruth,
    RankedList, WhiteningModel,
};

use crate::config::{GtFormat, RunConfig, WhiteningSource};
use crate::error::{config_err, CliError, CliResult};

fn load_manifest(cfg: &RunConfig, path: &Path) -> CliResult<FeatureSetManifest> {
    let manifest = FeatureSetManifest::load(path)?;
    manifest.validate(cfg.mode())?;
    Ok(manifest)
}

fn ensure_output_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| rmac_core::Error::io(dir, e).into())
}

pub fn fit_whitening(cfg: &RunConfig) -> CliResult<WhiteningModel> {
    let path = match &cfg.whitening_manifest {
        Some(p) => p.as_path(),
        None => cfg.require("gallery_manifest", &cfg.gallery_manifest)?,
    };
    let manifest = load_manifest(cfg, path)?;
    let grid = cfg.grid();
    let mode = cfg.mode();
    let start = Instant::now();
    let per_image = manifest
        .image_ids()
        .par_iter()
        .map(|id| region_macs(&manifest.load_image(id, mode)?, &grid, None))
        .collect::<rmac_core::Result<Vec<_>>>()?;
    let dim = manifest
        .channels()
        .ok_or_else(|| config_err(format!("{} lists no feature maps", path.display())))?;
    let rows: Vec<f32> = per_image
        .iter()
        .flatten()
        .flat_map(|d| d.values.iter().copied())
        .collect();
    let model = WhiteningModel::fit_rows(&rows, dim, DEFAULT_EPSILON)?;
    ensure_output_dir(&cfg.output_dir)?;
    let out = cfg.whitening_path();
    model.save(&out)?;
    let top: Vec<String> = model
        .eigenvalues()
        .unwrap_or_default()
        .iter()
        .take(5)
        .map(|v| format!("{v:.4e}"))
        .collect();
    println!(
        "whitening: D={dim} fitted on {} region vectors from {} images, top eigenvalues [{}] -> {}",
        rows.len() / dim,
        per_image.len(),
        top.join(", "),
        out.display()
    );
    log::info!("whitening fit took {:.2?}", start.elapsed());
    Ok(model)
}

fn load_whitening(cfg: &RunConfig) -> CliResult<WhiteningModel> {
    let path = cfg.whitening_path();
    if cfg.whitening == WhiteningSource::SelfFit && !path.exists() {
        return Err(config_err(format!(
            "{} not found; run fit-whitening first or set whitening to a model file",
            path.display()
        )));
    }
    Ok(WhiteningModel::load(path)?)
}

pub fn build(cfg: &RunConfig) -> CliResult<GalleryIndex> {
    let manifest = load_manifest(cfg, cfg.require("gallery_manifest", &cfg.gallery_manifest)?)?;
    let model = load_whitening(cfg)?;
    let grid = cfg.grid();
    let mode = cfg.mode();
    let start = Instant::now();
    let descriptors = manifest
        .image_ids()
        .par_iter()
        .map(|id| compute_image_descriptors(&manifest.load_image(id, mode)?, &model, &grid, None))
        .collect::<rmac_core::Result<Vec<_>>>()?;
    let index = build_index(&descriptors, cfg.detector, model.fingerprint())?;
    ensure_output_dir(&cfg.output_dir)?;
    index.save(cfg.index_path())?;
    println!(
        "index: {} images, {} region vectors, D={} -> {}",
        index.len(),
        index.total_regions(),
        index.dim(),
        cfg.index_path().display()
    );
    log::info!("index build took {:.2?}", start.elapsed());
    Ok(index)
}

fn load_gt(cfg: &RunConfig) -> CliResult<Option<GroundTruth>> {
    let Some(path) = &cfg.gt else { return Ok(None) };
    Ok(Some(match cfg.gt_format {
        GtFormat::Oxford => parse_oxford_gt(path)?,
        GtFormat::ClassList => parse_classlist_gt(path)?,
    }))
}

/// `image_id<TAB>width<TAB>height` lines giving original image pixel sizes.
pub fn load_image_sizes(path: &Path) -> CliResult<BTreeMap<String, (f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| rmac_core::Error::io(path, e))?;
    let mut sizes = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = match fields.as_slice() {
            [id, w, h] => w.parse::<f64>().ok().zip(h.parse::<f64>().ok()).map(|s| (id, s)),
            _ => None,
        };
        let (id, (w, h)) = parsed
            .filter(|(_, (w, h))| *w > 0.0 && *h > 0.0)
            .ok_or_else(|| rmac_core::Error::parse(path, i + 1, "expected `image_id<TAB>width<TAB>height`"))?;
        sizes.insert(id.to_string(), (w, h));
    }
    Ok(sizes)
}

struct QueryJob {
    query_id: String,
    image_id: String,
    crop: Option<CropSpec>,
}

fn query_jobs(cfg: &RunConfig, gt: Option<&GroundTruth>, manifest: &FeatureSetManifest) -> CliResult<Vec<QueryJob>> {
    let Some(gt) = gt else {
        return Ok(manifest
            .image_ids()
            .into_iter()
            .map(|id| QueryJob {
                query_id: id.to_string(),
                image_id: id.to_string(),
                crop: None,
            })
            .collect());
    };
    let needs_sizes = cfg.crop_queries && gt.queries.values().any(|q| q.bbox.is_some());
    let sizes = match (&cfg.image_sizes, needs_sizes) {
        (Some(p), true) => load_image_sizes(p)?,
        (None, true) => {
            return Err(config_err(
                "ground truth has query boxes: set image_sizes, or crop_queries = false",
            ))
        }
        _ => BTreeMap::new(),
    };
    gt.queries
        .iter()
        .map(|(qid, q)| {
            let crop = match (&q.bbox, cfg.crop_queries) {
                (Some(bbox), true) => {
                    let image_size = *sizes
                        .get(&q.query_image_id)
                        .ok_or_else(|| config_err(format!("image_sizes has no entry for {}", q.query_image_id)))?;
                    Some(CropSpec { bbox: *bbox, image_size })
                }
                _ => None,
            };
            Ok(QueryJob {
                query_id: qid.clone(),
                image_id: q.query_image_id.clone(),
                crop,
            })
        })
        .collect()
}

/// Output file stem for a query; path separators are replaced.
fn ranking_stem(query_id: &str) -> String {
    query_id.replace(['/', '\\'], "_")
}

pub struct QueryOutcome {
    pub rankings: Vec<RankedList>,
    pub expanded: Option<Vec<RankedList>>,
}

pub fn query(cfg: &RunConfig) -> CliResult<QueryOutcome> {
    let model = load_whitening(cfg)?;
    let index_path = cfg.index_path();
    if !index_path.exists() {
        return Err(config_err(format!("{} not found; run build-index first", index_path.display())));
    }
    let index = GalleryIndex::load_checked(&index_path, &model.fingerprint())?;
    if index.multiresolution() != cfg.multires {
        return Err(config_err(format!(
            "index was built with multires = {} but the config says {}",
            index.multiresolution(),
            cfg.multires
        )));
    }
    if index.detector() != cfg.detector {
        return Err(config_err(format!(
            "index was built with detector {} but the config says {}",
            index.detector(),
            cfg.detector
        )));
    }
    let manifest_path = match &cfg.query_manifest {
        Some(p) => p.as_path(),
        None => cfg.require("gallery_manifest", &cfg.gallery_manifest)?,
    };
    let manifest = load_manifest(cfg, manifest_path)?;
    let gt = load_gt(cfg)?;
    let jobs = query_jobs(cfg, gt.as_ref(), &manifest)?;
    let qe_k = cfg.resolved_qe_k(&manifest.dataset_name);
    let grid = cfg.grid();
    let mode = cfg.mode();
    let start = Instant::now();

    let results = jobs
        .par_iter()
        .map(|job| {
            let features = manifest.load_image(&job.image_id, mode)?;
            let desc = compute_image_descriptors(&features, &model, &grid, job.crop.as_ref())?;
            let ranked = cfg.retrieval.rank(&job.query_id, &desc.rmac_plus, &index)?;
            let expanded = match cfg.qe {
                Some(variant) => {
                    let q2 = expand_query(&desc.rmac_plus, &ranked, &index, qe_k, variant)?;
                    Some(cfg.retrieval.rank(&job.query_id, &q2, &index)?)
                }
                None => None,
            };
            Ok((ranked, expanded))
        })
        .collect::<rmac_core::Result<Vec<_>>>()?;

    let dir = cfg.rankings_dir();
    ensure_output_dir(&dir)?;
    let mut rankings = Vec::with_capacity(results.len());
    let mut expanded = cfg.qe.map(|_| Vec::with_capacity(results.len()));
    for (ranked, qe) in results {
        let stem = ranking_stem(&ranked.query_id);
        write_atomic(&dir.join(format!("{stem}.txt")), ranked.to_text().as_bytes())?;
        if let (Some(list), Some(out)) = (qe, expanded.as_mut()) {
            write_atomic(&dir.join(format!("{stem}.qe.txt")), list.to_text().as_bytes())?;
            out.push(list);
        }
        rankings.push(ranked);
    }
    println!(
        "query: {} queries ranked against {} images ({}{}) -> {}",
        rankings.len(),
        index.len(),
        cfg.retrieval,
        cfg.qe.map_or(String::new(), |v| format!(", qe {v} k={qe_k}")),
        dir.display()
    );
    log::info!("querying took {:.2?}", start.elapsed());
    Ok(QueryOutcome { rankings, expanded })
}

pub fn evaluate(cfg: &RunConfig) -> CliResult<EvaluationReport> {
    let gt = load_gt(cfg)?.ok_or_else(|| config_err("gt is not set"))?;
    let dir = cfg.rankings_dir();
    let suffix = if cfg.qe.is_some() { "qe.txt" } else { "txt" };
    let mut rankings = Vec::with_capacity(gt.len());
    for qid in gt.queries.keys() {
        let path = dir.join(format!("{}.{suffix}", ranking_stem(qid)));
        let text = fs::read_to_string(&path).map_err(|e| rmac_core::Error::io(&path, e))?;
        let list = RankedList::from_text(qid, &text).map_err(|message| rmac_core::Error::parse(&path, 0, message))?;
        rankings.push(list);
    }
    let report = mean_average_precision(&rankings, &gt)?;
    ensure_output_dir(&cfg.output_dir)?;
    write_atomic(&cfg.output_dir.join("report.txt"), report.to_text().as_bytes())?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&cfg.output_dir.join("report.json"), json.as_bytes())?;
    println!("mAP {:.4} over {} queries", report.map, report.per_query.len());
    Ok(report)
}

/// Runs fit (when self-whitening), build, query and, with ground truth, evaluate.
pub fn run_all(cfg: &RunConfig) -> CliResult<Option<EvaluationReport>> {
    if cfg.whitening == WhiteningSource::SelfFit {
        fit_whitening(cfg)?;
    }
    build(cfg)?;
    query(cfg)?;
    if cfg.gt.is_some() {
        evaluate(cfg).map(Some)
    } else {
        Ok(None)
    }
}

/// Writes a synthetic dataset plus a ready-to-run `run.conf` into `dir`.
pub fn write_synthetic(dir: &Path, synth: &SyntheticConfig) -> CliResult<()> {
    let data = synthetic::generate(synth)?;
    data.write_to(dir)?;
    let conf = format!(
        "# synthetic dataset, seed {}\n\
         gallery_manifest = gallery.tsv\n\
         query_manifest = queries.tsv\n\
         gt = gt.tsv\n\
         gt_format = classlist\n\
         multires = {}\n\
         retrieval = db_regions\n\
         output_dir = out\n",
        synth.seed, synth.multiresolution
    );
    write_atomic(&dir.join("run.conf"), conf.as_bytes())?;
    println!(
        "synthetic: {} gallery and {} query images -> {}",
        data.gallery.len(),
        data.queries.len(),
        dir.display()
    );
    Ok(())
}
