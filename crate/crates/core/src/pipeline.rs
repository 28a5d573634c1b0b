//! End-to-end queries over one loaded dataset: the shared entry points of
//! the HTTP service and the batch commands.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};

use crate::analytics::{difficulty_report, question_stats, CorrelationReport, QuestionStats};
use crate::event::{group_sessions, Cohort, QuestionMeta, RawEvent, Session};
use crate::heatmap::{
    accumulate_grid, accumulate_grid_dwell, smooth_grid, HeatGrid, DEFAULT_RESOLUTION,
    DEFAULT_SIGMA,
};
use crate::roi::{extract_rois, timed_points, RoiParams, RoiSet};
use crate::transition::{
    build_transition_map, compare_cohorts, CohortDiff, TransitionMap, TransitionMapExport,
    DEFAULT_MIN_EDGE_COUNT,
};
use crate::{Error, Result};

pub const MIN_RESOLUTION: usize = 8;
pub const MAX_RESOLUTION: usize = 512;

/// Sessions plus question metadata, indexed by question.
#[derive(Debug, Clone)]
pub struct Dataset {
    sessions: Vec<Session>,
    metas: Vec<QuestionMeta>,
    by_question: BTreeMap<String, Vec<usize>>,
    meta_index: BTreeMap<String, usize>,
}

impl Dataset {
    /// With `metas = None`, every question seen in the sessions gets
    /// difficulty 1 and a max score equal to its best observed score (1 if
    /// it has none), listed in id order.
    pub fn new(sessions: Vec<Session>, metas: Option<Vec<QuestionMeta>>) -> Dataset {
        let mut by_question: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (k, s) in sessions.iter().enumerate() {
            by_question.entry(s.question_id.clone()).or_default().push(k);
        }
        let metas = metas.unwrap_or_else(|| {
            by_question
                .iter()
                .map(|(qid, idx)| {
                    let best = idx
                        .iter()
                        .filter_map(|&k| sessions[k].outcome)
                        .fold(0.0, f64::max);
                    QuestionMeta {
                        question_id: qid.clone(),
                        difficulty_label: 1,
                        max_score: if best > 0.0 { best } else { 1.0 },
                        title: None,
                        background_image: None,
                    }
                })
                .collect()
        });
        let meta_index = metas
            .iter()
            .enumerate()
            .map(|(k, m)| (m.question_id.clone(), k))
            .collect();
        Dataset {
            sessions,
            metas,
            by_question,
            meta_index,
        }
    }

    pub fn from_events(events: Vec<RawEvent>, metas: Option<Vec<QuestionMeta>>) -> Dataset {
        Dataset::new(group_sessions(events), metas)
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn metas(&self) -> &[QuestionMeta] {
        &self.metas
    }

    pub fn meta(&self, question_id: &str) -> Result<&QuestionMeta> {
        self.meta_index
            .get(question_id)
            .map(|&k| &self.metas[k])
            .ok_or_else(|| Error::NotFound(format!("unknown question {question_id:?}")))
    }

    /// Sessions of a known question, in dataset order.
    pub fn question_sessions(&self, question_id: &str) -> Result<Vec<&Session>> {
        self.meta(question_id)?;
        Ok(self
            .by_question
            .get(question_id)
            .map(|idx| idx.iter().map(|&k| &self.sessions[k]).collect())
            .unwrap_or_default())
    }

    pub fn question_stats(&self) -> Vec<QuestionStats> {
        question_stats(&self.sessions, &self.metas)
    }

    pub fn summaries(&self) -> Vec<QuestionSummary> {
        self.question_stats()
            .into_iter()
            .zip(&self.metas)
            .map(|(st, m)| QuestionSummary {
                question_id: st.question_id,
                title: m.title.clone(),
                difficulty: st.difficulty_label,
                n_sessions: st.n_sessions,
                mean_score_norm: st.mean_score_norm,
            })
            .collect()
    }

    pub fn heatmap(&self, question_id: &str, params: &HeatmapParams) -> Result<HeatmapResult> {
        params.validate()?;
        let meta = self.meta(question_id)?;
        let sessions: Vec<&Session> = self
            .question_sessions(question_id)?
            .into_iter()
            .filter(|s| params.cohort.contains(s.normalized_score(meta.max_score)))
            .collect();
        let raw = if params.dwell {
            accumulate_grid_dwell(sessions.iter().copied(), params.res, params.res)?
        } else {
            accumulate_grid(sessions.iter().flat_map(|s| &s.events), params.res, params.res)?
        };
        Ok(HeatmapResult {
            question_id: question_id.to_string(),
            cohort: params.cohort,
            res: params.res,
            dwell: params.dwell,
            session_count: sessions.len(),
            grid: smooth_grid(&raw, params.sigma)?,
        })
    }

    /// ROIs of a question, extracted from all of its sessions regardless
    /// of cohort so that maps of different cohorts share ROI ids.
    pub fn rois(&self, question_id: &str, params: &TransitionParams) -> Result<RoiSet> {
        params.validate()?;
        let sessions = self.question_sessions(question_id)?;
        let grid = accumulate_grid(sessions.iter().flat_map(|s| &s.events), params.res, params.res)?;
        let grid = smooth_grid(&grid, params.sigma)?;
        extract_rois(&grid, &timed_points(sessions.iter().copied()), &params.roi_params())
    }

    pub fn transition_map(
        &self,
        question_id: &str,
        params: &TransitionParams,
        cohort: Cohort,
    ) -> Result<TransitionMap> {
        let rois = self.rois(question_id, params)?;
        let meta = self.meta(question_id)?;
        let sessions = self.question_sessions(question_id)?;
        build_transition_map(sessions, &rois, cohort, meta.max_score, params.min_edge)
    }

    pub fn transitions(&self, question_id: &str, params: &TransitionParams) -> Result<TransitionsResult> {
        let map = self.transition_map(question_id, params, params.cohort)?;
        Ok(TransitionsResult {
            question_id: question_id.to_string(),
            params: *params,
            map: map.export(),
        })
    }

    pub fn compare(
        &self,
        question_id: &str,
        params: &TransitionParams,
        cohort_a: Cohort,
        cohort_b: Cohort,
    ) -> Result<CohortDiff> {
        let a = self.transition_map(question_id, params, cohort_a)?;
        let b = self.transition_map(question_id, params, cohort_b)?;
        compare_cohorts(&a, &b)
    }

    pub fn correlation(&self, k_sigma: f64) -> Result<CorrelationReport> {
        difficulty_report(&self.question_stats(), k_sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSummary {
    pub question_id: String,
    pub title: Option<String>,
    pub difficulty: u32,
    pub n_sessions: usize,
    pub mean_score_norm: Option<f64>,
}

fn check_res(res: usize) -> Result<()> {
    if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&res) {
        return Err(Error::InvalidArgument(format!(
            "res must be in [{MIN_RESOLUTION}, {MAX_RESOLUTION}], got {res}"
        )));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapParams {
    pub res: usize,
    pub sigma: f64,
    pub cohort: Cohort,
    /// Weight samples by dwell time instead of counting them.
    pub dwell: bool,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        HeatmapParams {
            res: DEFAULT_RESOLUTION,
            sigma: DEFAULT_SIGMA,
            cohort: Cohort::All,
            dwell: false,
        }
    }
}

impl HeatmapParams {
    pub fn validate(&self) -> Result<()> {
        check_res(self.res)?;
        check_sigma(self.sigma)?;
        if let Cohort::ScoreRange { lo, hi } = self.cohort {
            Cohort::range(lo, hi)?;
        }
        Ok(())
    }
}

/// A smoothed grid together with the query that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResult {
    pub question_id: String,
    pub cohort: Cohort,
    pub res: usize,
    pub dwell: bool,
    pub session_count: usize,
    #[serde(flatten)]
    pub grid: HeatGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionParams {
    /// ROI merge radius in normalized canvas units.
    pub roi_size: f64,
    pub tau: f64,
    pub min_events: usize,
    pub bins: usize,
    pub min_edge: usize,
    pub cohort: Cohort,
    pub res: usize,
    pub sigma: f64,
}

impl Default for TransitionParams {
    fn default() -> Self {
        let roi = RoiParams::default();
        TransitionParams {
            roi_size: roi.merge_radius,
            tau: roi.tau,
            min_events: roi.min_events,
            bins: roi.time_bins,
            min_edge: DEFAULT_MIN_EDGE_COUNT,
            cohort: Cohort::All,
            res: DEFAULT_RESOLUTION,
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl TransitionParams {
    pub fn roi_params(&self) -> RoiParams {
        RoiParams {
            tau: self.tau,
            merge_radius: self.roi_size,
            min_events: self.min_events,
            time_bins: self.bins,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_res(self.res)?;
        check_sigma(self.sigma)?;
        if !self.roi_size.is_finite() {
            return Err(Error::InvalidArgument("roi_size must be finite".into()));
        }
        if let Cohort::ScoreRange { lo, hi } = self.cohort {
            Cohort::range(lo, hi)?;
        }
        self.roi_params().validate()
    }
}

/// A transition map together with the query that produced it. On the
/// wire the map's fields sit next to `question_id` and `params`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionsResult {
    pub question_id: String,
    pub params: TransitionParams,
    #[serde(flatten)]
    pub map: TransitionMapExport,
}

// Integer-keyed maps do not survive serde's flatten buffering, so the
// envelope fields are split off by hand.
impl<'de> Deserialize<'de> for TransitionsResult {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut value = serde_json::Value::deserialize(d)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| D::Error::custom("expected an object"))?;
        let mut take = |key: &'static str| obj.remove(key).ok_or_else(|| D::Error::missing_field(key));
        let question_id = String::deserialize(take("question_id")?).map_err(D::Error::custom)?;
        let params = TransitionParams::deserialize(take("params")?).map_err(D::Error::custom)?;
        let map = TransitionMapExport::deserialize(value).map_err(D::Error::custom)?;
        Ok(TransitionsResult {
            question_id,
            params,
            map,
        })
    }
}
