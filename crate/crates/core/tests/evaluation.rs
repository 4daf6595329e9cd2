mod common;

use std::collections::BTreeSet;

use common::oracle_ap;
use proptest::prelude::*;
use rmac_core::evaluation::QueryGroundTruth;
use rmac_core::{average_precision, mean_average_precision, GroundTruth, RankedEntry, RankedList};

fn ranking(q: &str, ids: &[String]) -> RankedList {
    RankedList {
        query_id: q.into(),
        entries: ids
            .iter()
            .enumerate()
            .map(|(i, id)| RankedEntry {
                image_id: id.clone(),
                score: i as f64,
                best_region_row: None,
            })
            .collect(),
    }
}

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn set(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn hand_computed_ap() {
    let none = set(&[]);
    let r = ranking("q", &ids(&["a", "x", "b", "y"]));
    assert_eq!(average_precision(&r, &set(&["a", "b"]), &none).unwrap(), (1.0 + 2.0 / 3.0) / 2.0);
    assert_eq!(average_precision(&r, &set(&["x"]), &none).unwrap(), 0.5);
    assert_eq!(average_precision(&r, &set(&["a", "x"]), &none).unwrap(), 1.0);
    // A positive absent from the ranking contributes zero.
    assert_eq!(average_precision(&r, &set(&["a", "zz"]), &none).unwrap(), 0.5);
    assert!(average_precision(&r, &none, &none).is_err());
}

#[test]
fn map_is_mean_of_reported_aps() {
    let mut gt = GroundTruth::default();
    for (q, pos) in [("q1", "a"), ("q2", "b")] {
        gt.queries.insert(
            q.into(),
            QueryGroundTruth {
                query_image_id: q.into(),
                positives: set(&[pos]),
                junk: set(&[]),
                bbox: None,
            },
        );
    }
    let rankings = vec![ranking("q1", &ids(&["a", "b"])), ranking("q2", &ids(&["a", "b"]))];
    let report = mean_average_precision(&rankings, &gt).unwrap();
    assert_eq!(report.map, 0.75);
    let mean = report.per_query.iter().map(|(_, ap)| ap).sum::<f64>() / report.per_query.len() as f64;
    assert_eq!(report.map, mean);
    assert!(report.to_text().ends_with("mAP\t0.750000\n"));
}

/// A permutation of `n` ids plus disjoint positive/junk labels.
fn labelled_ranking() -> impl Strategy<Value = (Vec<String>, BTreeSet<String>, BTreeSet<String>)> {
    (2usize..30)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(0u8..3, n),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            )
        })
        .prop_filter_map("needs a positive", |(n, labels, order)| {
            let ids: Vec<String> = order.iter().map(|i| format!("i{i:02}")).collect();
            let pos: BTreeSet<String> = (0..n).filter(|&i| labels[i] == 1).map(|i| format!("i{i:02}")).collect();
            let junk: BTreeSet<String> = (0..n).filter(|&i| labels[i] == 2).map(|i| format!("i{i:02}")).collect();
            (!pos.is_empty()).then_some((ids, pos, junk))
        })
}

proptest! {
    #[test]
    fn ap_matches_oracle_and_is_bounded((order, pos, junk) in labelled_ranking()) {
        let r = ranking("q", &order);
        let ap = average_precision(&r, &pos, &junk).unwrap();
        let refs: Vec<&str> = order.iter().map(String::as_str).collect();
        // The oracle sums in positive-id order, so allow rounding differences.
        prop_assert!((ap - oracle_ap(&refs, &pos, &junk)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ap));
        let filtered: Vec<&String> = order.iter().filter(|id| !junk.contains(*id)).collect();
        let perfect = filtered[..pos.len()].iter().all(|id| pos.contains(*id));
        prop_assert_eq!(ap == 1.0, perfect);
    }

    #[test]
    fn junk_insertion_is_invisible((order, pos, junk) in labelled_ranking(), at in any::<prop::sample::Index>()) {
        let base = average_precision(&ranking("q", &order), &pos, &junk).unwrap();
        let mut with = order.clone();
        let mut junk2 = junk.clone();
        junk2.insert("extra_junk".into());
        with.insert(at.index(order.len() + 1), "extra_junk".into());
        prop_assert_eq!(average_precision(&ranking("q", &with), &pos, &junk2).unwrap(), base);
    }

    #[test]
    fn moving_a_positive_up_never_hurts((order, pos, junk) in labelled_ranking(), pick in any::<prop::sample::Index>()) {
        let i = pick.index(order.len());
        prop_assume!(i > 0 && pos.contains(&order[i]));
        let before = average_precision(&ranking("q", &order), &pos, &junk).unwrap();
        let mut swapped = order.clone();
        swapped.swap(i - 1, i);
        let after = average_precision(&ranking("q", &swapped), &pos, &junk).unwrap();
        prop_assert!(after >= before);
    }
}
