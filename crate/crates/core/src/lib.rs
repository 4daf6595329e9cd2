//! Regional max-pooled CNN descriptors (R-MAC+) and "db regions" retrieval.
//!
//! The crate works on pre-extracted feature maps:
//!
//! - [`tensor_store`]: the `FMAP` tensor file and the dataset manifest.
//! - [`region_grid`]: the 15-region R-MAC+ detector, the rigid baseline grid
//!   and query bounding-box projection.
//! - [`descriptor`]: MAC pooling, L2 / PCA-whitening post-processing and
//!   (multi-resolution) R-MAC+ aggregation.
//! - [`retrieval`]: the gallery index, plain and minimum-region ranking, and
//!   average query expansion.
//! - [`evaluation`]: ground-truth parsing and mAP.
//! - [`synthetic`]: reproducible toy datasets for tests and benchmarks.

pub mod descriptor;
pub mod error;
pub mod evaluation;
mod io_util;
pub mod region_grid;
pub mod retrieval;
pub mod synthetic;
pub mod tensor_store;

pub use descriptor::{
    compute_image_descriptors, fit_whitening, l2_normalize, mac_pool, multires_aggregate, rmac_aggregate,
    whiten, CropSpec, Descriptor, ImageDescriptors, NormState, WhiteningModel,
};
pub use error::{Error, Result};
pub use evaluation::{
    average_precision, mean_average_precision, parse_classlist_gt, parse_oxford_gt, EvaluationReport,
    GroundTruth,
};
pub use io_util::write_atomic;
pub use region_grid::{
    generate_regions_plus, generate_regions_tolias, project_bbox, regions_plus_for_level, Detector, GridSpec,
    PixelBox, Region,
};
pub use retrieval::{
    build_index, expand_query, rank_db_regions, rank_plain, GalleryIndex, QeVariant, RankedEntry, RankedList,
    RetrievalMode,
};
pub use tensor_store::{
    read_feature_map, write_feature_map, FeatureMap, FeatureSetManifest, ImageFeatures, ResolutionMode,
    ResolutionTag,
};
