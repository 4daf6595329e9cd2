use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use super::GroundTruth;
use crate::error::{Error, Result};
use crate::retrieval::RankedList;

/// Non-interpolated AP. Junk entries are removed from the ranking before
/// scoring; positives missing from the ranking contribute zero precision.
pub fn average_precision(
    ranked: &RankedList,
    positives: &BTreeSet<String>,
    junk: &BTreeSet<String>,
) -> Result<f64> {
    ap_over_ids(ranked.image_ids(), positives, |id| junk.contains(id))
}

fn ap_over_ids<'a>(
    ids: impl Iterator<Item = &'a str>,
    positives: &BTreeSet<String>,
    is_junk: impl Fn(&str) -> bool,
) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::GroundTruth("average precision needs at least one positive".into()));
    }
    let mut seen = HashSet::new();
    let mut rank = 0usize;
    let mut hits = 0usize;
    let mut precision_sum = 0.0f64;
    for id in ids {
        if is_junk(id) || !seen.insert(id) {
            continue;
        }
        rank += 1;
        if positives.contains(id) {
            hits += 1;
            precision_sum += hits as f64 / rank as f64;
        }
    }
    Ok(precision_sum / positives.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    /// `(query_id, AP)` in query-id order.
    pub per_query: Vec<(String, f64)>,
    pub map: f64,
}

impl EvaluationReport {
    /// `query_id<TAB>AP` lines followed by `mAP<TAB>value`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (q, ap) in &self.per_query {
            out.push_str(&format!("{q}\t{ap:.6}\n"));
        }
        out.push_str(&format!("mAP\t{:.6}\n", self.map));
        out
    }
}

pub fn mean_average_precision(rankings: &[RankedList], gt: &GroundTruth) -> Result<EvaluationReport> {
    if gt.is_empty() {
        return Err(Error::GroundTruth("no queries to evaluate".into()));
    }
    let mut per_query = Vec::with_capacity(gt.len());
    for (query_id, q) in &gt.queries {
        let ranked = rankings
            .iter()
            .find(|r| &r.query_id == query_id)
            .ok_or_else(|| Error::GroundTruth(format!("no ranking for query {query_id:?}")))?;
        let exclude = gt.exclude_query_image.then_some(q.query_image_id.as_str());
        let ap = ap_over_ids(ranked.image_ids(), &q.positives, |id| {
            q.junk.contains(id) || Some(id) == exclude
        })?;
        per_query.push((query_id.clone(), ap));
    }
    let map = per_query.iter().map(|(_, ap)| ap).sum::<f64>() / per_query.len() as f64;
    Ok(EvaluationReport { per_query, map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::QueryGroundTruth;
    use crate::retrieval::RankedEntry;

    fn ranking(q: &str, ids: &[&str]) -> RankedList {
        RankedList {
            query_id: q.into(),
            entries: ids
                .iter()
                .enumerate()
                .map(|(i, id)| RankedEntry {
                    image_id: id.to_string(),
                    score: i as f64,
                    best_region_row: None,
                })
                .collect(),
        }
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_computed_values() {
        let none = set(&[]);
        let ap = |ids: &[&str], pos: &[&str]| average_precision(&ranking("q", ids), &set(pos), &none).unwrap();
        assert_eq!(ap(&["a", "b", "c"], &["a", "b"]), 1.0);
        assert_eq!(ap(&["x", "a", "c"], &["a"]), 0.5);
        assert!((ap(&["a", "x", "b"], &["a", "b"]) - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        // positive missing from a truncated ranking
        assert_eq!(ap(&["a", "x"], &["a", "b"]), 0.5);
        assert!(average_precision(&ranking("q", &["a"]), &none, &none).is_err());
    }

    #[test]
    fn junk_is_removed() {
        let pos = set(&["a", "b"]);
        let junk = set(&["j1", "j2"]);
        let base = average_precision(&ranking("q", &["a", "x", "b"]), &pos, &junk).unwrap();
        let with_junk = average_precision(&ranking("q", &["j1", "a", "x", "j2", "b"]), &pos, &junk).unwrap();
        assert_eq!(base, with_junk);
    }

    fn gt(queries: &[(&str, &[&str])]) -> GroundTruth {
        GroundTruth {
            queries: queries
                .iter()
                .map(|(q, pos)| {
                    (
                        q.to_string(),
                        QueryGroundTruth {
                            query_image_id: q.to_string(),
                            positives: set(pos),
                            junk: BTreeSet::new(),
                            bbox: None,
                        },
                    )
                })
                .collect(),
            exclude_query_image: false,
        }
    }

    #[test]
    fn map_is_mean_of_aps() {
        let g = gt(&[("q1", &["a"]), ("q2", &["b"])]);
        let report = mean_average_precision(&[ranking("q1", &["a", "b"]), ranking("q2", &["a", "b"])], &g).unwrap();
        assert_eq!(report.per_query, vec![("q1".into(), 1.0), ("q2".into(), 0.5)]);
        assert_eq!(report.map, 0.75);
        assert!(report.to_text().ends_with("mAP\t0.750000\n"));
        assert!(mean_average_precision(&[ranking("q1", &["a"])], &g).is_err());
    }

    #[test]
    fn self_match_excluded_for_classlists() {
        let mut g = gt(&[("q", &["a"])]);
        let r = ranking("q", &["q", "a"]);
        assert_eq!(mean_average_precision(std::slice::from_ref(&r), &g).unwrap().map, 0.5);
        g.exclude_query_image = true;
        assert_eq!(mean_average_precision(&[r], &g).unwrap().map, 1.0);
    }
}
