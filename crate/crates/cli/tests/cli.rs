use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rmac_core::synthetic::{generate, SyntheticConfig};

const BIN: &str = env!("CARGO_BIN_EXE_rmac");

fn rmac(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("failed to launch rmac")
}

fn ok(args: &[&str]) -> String {
    let out = rmac(args);
    assert!(
        out.status.success(),
        "rmac {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    rmac(args).status.code().expect("killed by signal")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic dataset (default seed) in a fresh temp dir; returns (dir, run.conf).
fn dataset(extra: &[&str]) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["synth", s(dir.path())];
    args.extend_from_slice(extra);
    ok(&args);
    let conf = dir.path().join("run.conf");
    (dir, conf)
}

fn report_map(dir: &Path) -> f64 {
    let text = fs::read_to_string(dir.join("report.txt")).unwrap();
    let last = text.lines().last().unwrap();
    last.strip_prefix("mAP\t").unwrap().parse().unwrap()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_runs_are_byte_identical() {
    let (dir, conf) = dataset(&["--multires-maps"]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["--config", s(&conf), "--output-dir", s(&a), "--qe", "db_regions", "--qe-k", "2", "all"]);
    ok(&["--config", s(&conf), "--output-dir", s(&b), "--qe", "db_regions", "--qe-k", "2", "--jobs", "1", "all"]);
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    let names: Vec<&str> = ta.iter().map(|(n, _)| n.as_str()).collect();
    for expected in ["whitening.whtn", "index.ridx", "report.txt", "report.json", "rankings/c0_q000.txt", "rankings/c0_q000.qe.txt"] {
        assert!(names.contains(&expected), "missing {expected} in {names:?}");
    }
    assert_eq!(ta, tb);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["map"].as_f64().unwrap(), report_map(&a));
}

#[test]
fn db_regions_beat_plain_on_synthetic_data() {
    let (dir, conf) = dataset(&[]);
    let db = dir.path().join("db");
    let plain = dir.path().join("plain");
    ok(&["--config", s(&conf), "--output-dir", s(&db), "all"]);
    ok(&["--config", s(&conf), "--output-dir", s(&plain), "--retrieval", "plain", "all"]);
    assert_eq!(report_map(&db), 1.0);
    assert!(report_map(&plain) < report_map(&db));

    // The report's mAP is the mean of its per-query column.
    let text = fs::read_to_string(db.join("report.txt")).unwrap();
    let aps: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with("mAP"))
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(aps.len(), 6);
    assert!((aps.iter().sum::<f64>() / 6.0 - report_map(&db)).abs() < 1e-6);
}

#[test]
fn shuffled_rankings_score_below_one() {
    let (dir, conf) = dataset(&[]);
    let out = dir.path().join("out");
    ok(&["--config", s(&conf), "--output-dir", s(&out), "all"]);
    let rankings = out.join("rankings");
    for entry in fs::read_dir(&rankings).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let mut ids: Vec<&str> = text.lines().map(|l| l.split('\t').nth(1).unwrap()).collect();
        ids.reverse();
        let reversed: String = ids
            .iter()
            .enumerate()
            .map(|(i, id)| format!("{}\t{id}\t{}.000000\n", i + 1, i))
            .collect();
        fs::write(&path, reversed).unwrap();
    }
    ok(&["--config", s(&conf), "--output-dir", s(&out), "evaluate"]);
    assert!(report_map(&out) < 1.0);
}

#[test]
fn gallery_image_as_query_ranks_itself_first() {
    let (dir, _) = dataset(&[]);
    let conf = dir.path().join("self.conf");
    fs::write(
        &conf,
        "gallery_manifest = gallery.tsv\nquery_manifest = gallery.tsv\nmultires = false\noutput_dir = self\n",
    )
    .unwrap();
    for mode in ["plain", "db_regions"] {
        ok(&["--config", s(&conf), "--retrieval", mode, "all"]);
        let text = fs::read_to_string(dir.path().join("self/rankings/c1_g004.txt")).unwrap();
        let first: Vec<&str> = text.lines().next().unwrap().split('\t').collect();
        assert_eq!(first[1], "c1_g004", "{mode}");
        // Plain mode compares R-MAC+ to R-MAC+, so the self-match is exact.
        if mode == "plain" {
            assert_eq!(first[2], "0.000000");
        }
        assert!(!dir.path().join("self/report.txt").exists());
    }
}

#[test]
fn whitening_is_reproducible_and_index_counts_regions() {
    let (dir, _) = dataset(&[]);
    let gallery = fs::read_to_string(dir.path().join("gallery.tsv")).unwrap();
    let four: String = gallery
        .lines()
        .filter(|l| l.starts_with('#') || ["c0_g000", "c1_g001", "c2_g002", "c0_g003"].iter().any(|id| l.starts_with(id)))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(dir.path().join("four.tsv"), four).unwrap();
    let small = dir.path().join("small.conf");
    fs::write(&small, "gallery_manifest = four.tsv\nmultires = false\noutput_dir = small\n").unwrap();
    let fit = ok(&["--config", s(&small), "fit-whitening"]);
    assert!(fit.contains("D=32") && fit.contains("60 region vectors"), "{fit}");
    let first = fs::read(dir.path().join("small/whitening.whtn")).unwrap();
    ok(&["--config", s(&small), "fit-whitening"]);
    assert_eq!(fs::read(dir.path().join("small/whitening.whtn")).unwrap(), first);
    let build = ok(&["--config", s(&small), "build-index"]);
    assert!(build.contains("4 images, 60 region vectors"), "{build}");
}

#[test]
fn config_errors_exit_with_2() {
    let (dir, conf) = dataset(&[]);
    let c = s(&conf);
    let out = dir.path().join("o");
    let o = s(&out);
    assert_eq!(code(&["--config", "/no/such/run.conf", "all"]), 2);
    assert_eq!(code(&["--config", c, "--output-dir", o, "--detector", "grid", "all"]), 2);
    assert_eq!(code(&["--config", c, "--output-dir", o, "--qe", "rmac", "--qe-k", "0", "all"]), 2);
    assert_eq!(code(&["--config", c, "--output-dir", o, "--jobs", "many", "all"]), 2);
    assert_eq!(code(&["--config", c, "--output-dir", o, "query"]), 2);
    assert_eq!(code(&["--config", c, "--output-dir", o, "frobnicate"]), 2);
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "gallery_manifest = missing.tsv\n").unwrap();
    assert_eq!(code(&["--config", s(&bad), "fit-whitening"]), 2);
    // Nothing was written by the failed runs.
    assert!(!out.exists());
}

#[test]
fn data_errors_exit_with_3() {
    let (dir, conf) = dataset(&[]);
    let out = dir.path().join("o");
    // Single-resolution maps requested as multi-resolution.
    assert_eq!(code(&["--config", s(&conf), "--output-dir", s(&out), "--multires", "true", "all"]), 3);

    // Mixed channel counts in one manifest.
    let gallery = fs::read_to_string(dir.path().join("gallery.tsv")).unwrap();
    let mixed = gallery.replacen("\t32\n", "\t16\n", 1);
    fs::write(dir.path().join("mixed.tsv"), mixed).unwrap();
    let mixed_conf = dir.path().join("mixed.conf");
    fs::write(&mixed_conf, "gallery_manifest = mixed.tsv\nmultires = false\noutput_dir = m\n").unwrap();
    assert_eq!(code(&["--config", s(&mixed_conf), "fit-whitening"]), 3);
    assert!(!dir.path().join("m/whitening.whtn").exists());

    // A corrupted feature map.
    let victim = dir.path().join("maps/c2_g029_base.fmap");
    let mut bytes = fs::read(&victim).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&victim, bytes).unwrap();
    assert_eq!(code(&["--config", s(&conf), "--output-dir", s(&out), "all"]), 3);
}

/// Oxford-style ground truth whose single query is a cluttered gallery image
/// cropped to its object box.
#[test]
fn oxford_gt_with_query_crop() {
    let (dir, conf) = dataset(&[]);
    let data = generate(&SyntheticConfig::default()).unwrap();
    let query = &data.gallery[0];
    let patch = query.patch.unwrap();
    let scale = 16.0;
    let gt = dir.path().join("gt_oxford");
    fs::create_dir(&gt).unwrap();
    let (x1, y1) = (patch.x0 as f64 * scale, patch.y0 as f64 * scale);
    let (x2, y2) = (x1 + patch.w as f64 * scale, y1 + patch.h as f64 * scale);
    fs::write(gt.join("obj_1_query.txt"), format!("oxc1_{} {x1} {y1} {x2} {y2}\n", query.image_id)).unwrap();
    let same: Vec<&str> = data
        .gallery
        .iter()
        .filter(|g| g.class == query.class)
        .map(|g| g.image_id.as_str())
        .collect();
    fs::write(gt.join("obj_1_good.txt"), same[..6].join("\n")).unwrap();
    fs::write(gt.join("obj_1_ok.txt"), same[6..].join("\n")).unwrap();
    let other = data.gallery.iter().find(|g| g.class != query.class).unwrap();
    fs::write(gt.join("obj_1_junk.txt"), format!("{}\n", other.image_id)).unwrap();
    let sizes: String = data
        .gallery
        .iter()
        .map(|g| format!("{}\t{}\t{}\n", g.image_id, 24.0 * scale, 18.0 * scale))
        .collect();
    fs::write(dir.path().join("sizes.tsv"), sizes).unwrap();

    let ox = dir.path().join("oxford.conf");
    let base = fs::read_to_string(&conf).unwrap();
    let without_sizes = base
        .replace("query_manifest = queries.tsv", "query_manifest = gallery.tsv")
        .replace("gt = gt.tsv", "gt = gt_oxford")
        .replace("gt_format = classlist", "gt_format = oxford")
        .replace("output_dir = out", "output_dir = ox");
    fs::write(&ox, &without_sizes).unwrap();
    assert_eq!(code(&["--config", s(&ox), "all"]), 2);

    fs::write(&ox, format!("{without_sizes}image_sizes = sizes.tsv\n")).unwrap();
    ok(&["--config", s(&ox), "all"]);
    let cropped = report_map(&dir.path().join("ox"));
    assert_eq!(cropped, 1.0);
    let ranking = fs::read_to_string(dir.path().join("ox/rankings/obj_1.txt")).unwrap();
    assert_eq!(ranking.lines().count(), 30);

    let uncropped = format!("{}crop_queries = false\n", without_sizes.replace("output_dir = ox", "output_dir = whole"));
    fs::write(&ox, uncropped).unwrap();
    ok(&["--config", s(&ox), "all"]);
    let whole = report_map(&dir.path().join("whole"));
    // Without the crop the clutter dominates the query descriptor.
    assert!(whole < cropped, "whole-image query mAP {whole}");
}
