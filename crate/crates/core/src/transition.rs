//! Directed transition maps between ROIs, per outcome cohort.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analytics::rank_correlation;
use crate::event::{Cohort, Session};
use crate::roi::{Roi, RoiSet};
use crate::{Error, Result};

pub const DEFAULT_MIN_EDGE_COUNT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEdge {
    #[serde(rename = "from")]
    pub from_roi: usize,
    #[serde(rename = "to")]
    pub to_roi: usize,
    pub count: usize,
    /// Mean normalized time of arrival in the destination ROI.
    pub mean_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMap {
    pub cohort: Cohort,
    pub rois: Vec<Roi>,
    /// Sorted by (from, to).
    pub edges: Vec<TransitionEdge>,
    pub session_count: usize,
    /// Mean over visiting sessions of the first arrival time in each ROI.
    pub roi_first_visit: BTreeMap<usize, f64>,
}

/// The run-collapsed ROI sequence of one session: `(roi, arrival t_norm)`
/// per run. Positional events outside every ROI are dropped first.
pub fn roi_runs(session: &Session, rois: &RoiSet) -> Vec<(usize, f64)> {
    let mut runs: Vec<(usize, f64)> = Vec::new();
    for (ev, t) in session.positional() {
        let (x, y) = ev.position().expect("positional");
        let Some(roi) = rois.locate(x, y) else { continue };
        if runs.last().is_none_or(|&(last, _)| last != roi) {
            runs.push((roi, t));
        }
    }
    runs
}

/// Aggregates ROI-to-ROI transitions over the sessions in `cohort`.
///
/// Cohort membership uses `outcome / max_score`. Sessions are processed in
/// session-id order so the result does not depend on input order.
pub fn build_transition_map<'a, I>(
    sessions: I,
    rois: &RoiSet,
    cohort: Cohort,
    max_score: f64,
    min_edge_count: usize,
) -> Result<TransitionMap>
where
    I: IntoIterator<Item = &'a Session>,
{
    if let Cohort::ScoreRange { lo, hi } = cohort {
        Cohort::range(lo, hi)?;
    }
    if !(max_score > 0.0) {
        return Err(Error::invalid(format!("max_score must be > 0, got {max_score}")));
    }

    let mut selected: Vec<&Session> = sessions
        .into_iter()
        .filter(|s| cohort.contains(s.normalized_score(max_score)))
        .collect();
    selected.sort_by(|a, b| a.session_id.cmp(&b.session_id));

    let mut edges: BTreeMap<(usize, usize), (usize, f64)> = BTreeMap::new();
    let mut first_visits: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for s in &selected {
        let runs = roi_runs(s, rois);
        let mut seen = BTreeSet::new();
        for &(roi, t) in &runs {
            if seen.insert(roi) {
                let e = first_visits.entry(roi).or_default();
                e.0 += 1;
                e.1 += t;
            }
        }
        for pair in runs.windows(2) {
            let ((a, _), (b, t)) = (pair[0], pair[1]);
            let e = edges.entry((a, b)).or_default();
            e.0 += 1;
            e.1 += t;
        }
    }

    Ok(TransitionMap {
        cohort,
        rois: rois.rois.clone(),
        edges: edges
            .into_iter()
            .filter(|(_, (count, _))| *count >= min_edge_count.max(1))
            .map(|((from_roi, to_roi), (count, sum))| TransitionEdge {
                from_roi,
                to_roi,
                count,
                mean_time: sum / count as f64,
            })
            .collect(),
        session_count: selected.len(),
        roi_first_visit: first_visits
            .into_iter()
            .map(|(roi, (n, sum))| (roi, sum / n as f64))
            .collect(),
    })
}

/// Rank correlation between ROI centroid x and mean first-visit time over
/// visited ROIs: +1 is a strict left-to-right order, -1 right-to-left.
pub fn ordering_score(map: &TransitionMap) -> Result<f64> {
    let (xs, ts): (Vec<f64>, Vec<f64>) = map
        .rois
        .iter()
        .filter_map(|r| map.roi_first_visit.get(&r.roi_id).map(|&t| (r.centroid[0], t)))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::precondition(format!(
            "ordering score needs at least 2 visited ROIs, got {}",
            xs.len()
        )));
    }
    rank_correlation(&xs, &ts).map_err(|_| {
        Error::precondition("ordering score undefined: ROI positions or visit times all tied")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitStatus {
    Both,
    /// Visited by cohort b only.
    AUnvisited,
    /// Visited by cohort a only.
    BUnvisited,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiComparison {
    pub roi_id: usize,
    pub status: VisitStatus,
    pub a_first_visit: Option<f64>,
    pub b_first_visit: Option<f64>,
    /// `a - b`, only when both cohorts visit the ROI.
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignRelation {
    Same,
    Opposite,
    /// A score is missing or zero.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortDiff {
    pub cohort_a: Cohort,
    pub cohort_b: Cohort,
    pub per_roi: Vec<RoiComparison>,
    pub score_a: Option<f64>,
    pub score_b: Option<f64>,
    pub relation: SignRelation,
}

/// Compares first-visit times and ordering scores of two maps built over
/// the same ROIs.
pub fn compare_cohorts(a: &TransitionMap, b: &TransitionMap) -> Result<CohortDiff> {
    let ids_a: BTreeSet<usize> = a.rois.iter().map(|r| r.roi_id).collect();
    let ids_b: BTreeSet<usize> = b.rois.iter().map(|r| r.roi_id).collect();
    let shared: Vec<usize> = ids_a.intersection(&ids_b).copied().collect();
    if shared.is_empty() && !(ids_a.is_empty() && ids_b.is_empty()) {
        return Err(Error::invalid("transition maps share no ROIs"));
    }
    let per_roi = shared
        .into_iter()
        .map(|roi_id| {
            let fa = a.roi_first_visit.get(&roi_id).copied();
            let fb = b.roi_first_visit.get(&roi_id).copied();
            let status = match (fa, fb) {
                (Some(_), Some(_)) => VisitStatus::Both,
                (None, Some(_)) => VisitStatus::AUnvisited,
                (Some(_), None) => VisitStatus::BUnvisited,
                (None, None) => VisitStatus::Neither,
            };
            RoiComparison {
                roi_id,
                status,
                a_first_visit: fa,
                b_first_visit: fb,
                difference: fa.zip(fb).map(|(x, y)| x - y),
            }
        })
        .collect();
    let score_a = ordering_score(a).ok();
    let score_b = ordering_score(b).ok();
    let relation = match (score_a, score_b) {
        (Some(x), Some(y)) if x * y > 0.0 => SignRelation::Same,
        (Some(x), Some(y)) if x * y < 0.0 => SignRelation::Opposite,
        _ => SignRelation::Undetermined,
    };
    Ok(CohortDiff {
        cohort_a: a.cohort,
        cohort_b: b.cohort,
        per_roi,
        score_a,
        score_b,
        relation,
    })
}

/// Wire form of a transition map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMapExport {
    pub cohort: Cohort,
    pub session_count: usize,
    pub rois: Vec<usize>,
    pub edges: Vec<TransitionEdge>,
    pub roi_first_visit: BTreeMap<usize, f64>,
    pub ordering_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering_score_reason: Option<String>,
    /// Full ROI records (centroid, bbox, counts, time histogram).
    pub roi_details: Vec<Roi>,
}

impl TransitionMap {
    pub fn export(&self) -> TransitionMapExport {
        let (ordering_score, ordering_score_reason) = match ordering_score(self) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        };
        TransitionMapExport {
            cohort: self.cohort,
            session_count: self.session_count,
            rois: self.rois.iter().map(|r| r.roi_id).collect(),
            edges: self.edges.clone(),
            roi_first_visit: self.roi_first_visit.clone(),
            ordering_score,
            ordering_score_reason,
            roi_details: self.rois.clone(),
        }
    }

    /// Graphviz description: one node per ROI (labelled with its event
    /// count, pinned at its centroid) and weighted directed edges.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph transitions {\n");
        for r in &self.rois {
            let _ = writeln!(
                out,
                "  roi{} [label=\"{}\", count={}, pos=\"{},{}!\"];",
                r.roi_id,
                r.event_count,
                r.event_count,
                r.centroid[0],
                1.0 - r.centroid[1]
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  roi{} -> roi{} [weight={}, penwidth={}, mean_time={}];",
                e.from_roi,
                e.to_roi,
                e.count,
                1.0 + (e.count as f64).ln(),
                e.mean_time
            );
        }
        out.push_str("}\n");
        out
    }
}
