use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trailscope_core::event::{group_sessions, Cohort, Session};
use trailscope_core::heatmap::{accumulate_grid, smooth_grid};
use trailscope_core::roi::{extract_rois, timed_points, RoiParams, RoiSet};
use trailscope_core::synthgen::gen_dataset;
use trailscope_core::transition::{
    build_transition_map, compare_cohorts, ordering_score, roi_runs, SignRelation, TransitionMap,
};
use trailscope_testkit::oracle::enumerate_transitions;
use trailscope_testkit::scenario::{labelled_sessions, ordering_config, random_label_sequences};

fn edge_counts(map: &TransitionMap) -> BTreeMap<(usize, usize), usize> {
    map.edges.iter().map(|e| ((e.from_roi, e.to_roi), e.count)).collect()
}

#[test]
fn edge_counts_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..500 {
        let seqs = random_label_sequences(&mut rng, 5, 10, 3);
        let (rois, sessions) = labelled_sessions(&seqs);
        let map = build_transition_map(&sessions, &rois, Cohort::All, 1.0, 1).unwrap();
        assert_eq!(edge_counts(&map), enumerate_transitions(&seqs), "{seqs:?}");
    }
}

#[test]
fn min_edge_count_only_drops_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let seqs = random_label_sequences(&mut rng, 5, 10, 3);
        let (rois, sessions) = labelled_sessions(&seqs);
        let total: usize = sessions.iter().map(|s| roi_runs(s, &rois).len().saturating_sub(1)).sum();
        let all = build_transition_map(&sessions, &rois, Cohort::All, 1.0, 1).unwrap();
        let some = build_transition_map(&sessions, &rois, Cohort::All, 1.0, 3).unwrap();
        assert_eq!(all.edges.iter().map(|e| e.count).sum::<usize>(), total);
        assert!(some.edges.iter().map(|e| e.count).sum::<usize>() <= total);
        assert!(some.edges.iter().all(|e| e.count >= 3));
    }
}

#[test]
fn independent_of_session_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let seqs = random_label_sequences(&mut rng, 5, 10, 3);
        let (rois, mut sessions) = labelled_sessions(&seqs);
        let a = build_transition_map(&sessions, &rois, Cohort::All, 1.0, 1).unwrap();
        sessions.shuffle(&mut rng);
        let b = build_transition_map(&sessions, &rois, Cohort::All, 1.0, 1).unwrap();
        assert_eq!(a, b);
    }
}

fn pipeline(sessions: &[Session]) -> RoiSet {
    let events: Vec<_> = sessions.iter().flat_map(|s| s.events.iter()).collect();
    let grid = smooth_grid(&accumulate_grid(events, 64, 64).unwrap(), 1.5).unwrap();
    extract_rois(&grid, &timed_points(sessions), &RoiParams::default()).unwrap()
}

#[test]
fn noiseless_left_to_right_chain() {
    let mut cfg = ordering_config(4, 50, 0.0);
    cfg.cohorts.truncate(1);
    let sessions = group_sessions(gen_dataset(&cfg).unwrap().events);
    assert_eq!(sessions.len(), 50);
    let rois = pipeline(&sessions);
    assert_eq!(rois.len(), 4);
    let map = build_transition_map(&sessions, &rois, Cohort::All, 2.0, 2).unwrap();
    let by_x: Vec<usize> = {
        let mut r = rois.rois.clone();
        r.sort_by(|a, b| a.centroid[0].total_cmp(&b.centroid[0]));
        r.iter().map(|r| r.roi_id).collect()
    };
    let chain: Vec<(usize, usize)> = by_x.windows(2).map(|w| (w[0], w[1])).collect();
    let mut got: Vec<(usize, usize)> = map.edges.iter().map(|e| (e.from_roi, e.to_roi)).collect();
    got.sort_by_key(|&(a, _)| by_x.iter().position(|&x| x == a));
    assert_eq!(got, chain);
    assert!(map.edges.iter().all(|e| e.count == 50));
    let times: Vec<f64> = chain
        .iter()
        .map(|p| map.edges.iter().find(|e| (e.from_roi, e.to_roi) == *p).unwrap().mean_time)
        .collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]), "{times:?}");
    assert!((ordering_score(&map).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn four_roi_random_order_scores_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rois: RoiSet = RoiSet::from_regions(
        4,
        1,
        (0..4).map(|i| vec![(i, 0)]).collect(),
        &[],
        1,
    )
    .unwrap();
    let mut total = 0.0;
    // ROI k sits in column k, so centroid x increases with id
    for trial in 0..1000 {
        let mut order = vec![0usize, 1, 2, 3];
        order.shuffle(&mut rng);
        let seq: Vec<Option<usize>> = order.iter().map(|&r| Some(r)).collect();
        let (_, mut sessions) = labelled_sessions(&[seq]);
        for (e, &col) in sessions[0].events.iter_mut().zip(&order) {
            e.x = Some((col as f64 + 0.5) / 4.0);
            e.session_id = format!("t{trial}");
        }
        let map = build_transition_map(&sessions, &rois, Cohort::All, 1.0, 1).unwrap();
        total += ordering_score(&map).unwrap();
    }
    let mean = total / 1000.0;
    assert!(mean.abs() <= 0.1, "mean {mean}");
}

#[test]
fn score_is_rank_invariant() {
    let (rois, sessions) = labelled_sessions(&[vec![Some(0), None, Some(2), Some(1)]]);
    let mut map = build_transition_map(&sessions, &rois, Cohort::All, 1.0, 1).unwrap();
    let before = ordering_score(&map).unwrap();
    for t in map.roi_first_visit.values_mut() {
        *t = (*t * 3.0).exp() + 5.0;
    }
    assert_eq!(before, ordering_score(&map).unwrap());
}

#[test]
fn planted_cohorts_have_opposite_order() {
    for seed in 0..3 {
        let sessions = group_sessions(gen_dataset(&ordering_config(seed, 100, 0.02)).unwrap().events);
        let rois = pipeline(&sessions);
        assert_eq!(rois.len(), 4);
        let full = build_transition_map(&sessions, &rois, Cohort::FullMarks, 2.0, 2).unwrap();
        let wrong = build_transition_map(&sessions, &rois, Cohort::Wrong, 2.0, 2).unwrap();
        assert_eq!(full.session_count, 100);
        assert_eq!(wrong.session_count, 100);
        let diff = compare_cohorts(&wrong, &full).unwrap();
        assert_eq!(diff.relation, SignRelation::Opposite);
        assert!(diff.score_a.unwrap() <= -0.9);
        assert!(diff.score_b.unwrap() >= 0.9);
        let same = compare_cohorts(&full, &full).unwrap();
        assert!(same.per_roi.iter().all(|r| r.difference == Some(0.0)));
    }
}
