//! Ground truth parsing and mean Average Precision.

mod ap;
mod gt;

pub use ap::{average_precision, mean_average_precision, EvaluationReport};
pub use gt::{parse_classlist_gt, parse_oxford_gt, GroundTruth, QueryGroundTruth};
