//! Compares plain and db-regions retrieval on generated data.
//!
//! cargo run --release -p rmac-core --example synthetic_map -- [seed] [clutter_blobs] [clutter_strength]

use rmac_core::descriptor::{fit_whitening_on_images, DEFAULT_EPSILON};
use rmac_core::synthetic::{generate, SyntheticConfig};
use rmac_core::{build_index, compute_image_descriptors, mean_average_precision, GridSpec, RetrievalMode};

fn main() -> rmac_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = SyntheticConfig::default();
    if let Some(s) = args.first() {
        cfg.seed = s.parse().expect("seed");
    }
    if let Some(b) = args.get(1) {
        cfg.clutter_blobs = b.parse().expect("blobs");
    }
    if let Some(c) = args.get(2) {
        cfg.clutter_strength = c.parse().expect("strength");
    }
    let ds = generate(&cfg)?;
    let grid = GridSpec::rmac_plus();
    let gallery: Vec<_> = ds.gallery.iter().map(|g| g.features()).collect();
    let model = fit_whitening_on_images(&gallery, &grid, DEFAULT_EPSILON)?;
    let described = gallery
        .iter()
        .map(|f| compute_image_descriptors(f, &model, &grid, None))
        .collect::<rmac_core::Result<Vec<_>>>()?;
    let index = build_index(&described, grid.detector, model.fingerprint())?;
    let gt = ds.ground_truth();
    for mode in [RetrievalMode::Plain, RetrievalMode::DbRegions] {
        let rankings = ds
            .queries
            .iter()
            .map(|q| {
                let d = compute_image_descriptors(&q.features(), &model, &grid, None)?;
                mode.rank(&q.image_id, &d.rmac_plus, &index)
            })
            .collect::<rmac_core::Result<Vec<_>>>()?;
        let report = mean_average_precision(&rankings, &gt)?;
        println!("{mode}\tmAP {:.4}", report.map);
    }
    Ok(())
}
