//! Seeded generator of synthetic question-solving sessions with planted
//! trajectories, outcomes and difficulty/score relations.
//!
//! Every random draw comes from a ChaCha8 stream. Session `k` (counted over
//! the whole dataset in generation order) uses the seed
//! `mix_seed(config.seed, k)`; question `q`'s mean score uses
//! `mix_seed(mix_seed(config.seed, QUESTION_DOMAIN), q)`, where `mix_seed`
//! is the SplitMix64 finalizer applied to `seed + index * 0x9E3779B97F4A7C15`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::event::{write_event_log, EventType, QuestionMeta, RawEvent, Session};
use crate::{Error, Result};

const QUESTION_DOMAIN: u64 = 0x5155_4553_5449_4f4e;

/// SplitMix64 of `seed + index * golden_gamma`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    #[default]
    WaypointPath,
    AdditiveHorizontal,
    AdditiveVertical,
    Subtractive,
}

/// Starting position of the draggable point in the preset layouts.
pub const PRESET_START: [f64; 2] = [0.3, 0.7];

impl PatternKind {
    /// Planted anchor path for the drag-the-point presets. All start at
    /// [`PRESET_START`]; the additive paths extend the shape along one axis
    /// and the subtractive path overshoots diagonally.
    pub fn preset_waypoints(self) -> Vec<[f64; 2]> {
        match self {
            PatternKind::WaypointPath => Vec::new(),
            PatternKind::AdditiveHorizontal => vec![PRESET_START, [0.5, 0.7], [0.7, 0.7]],
            PatternKind::AdditiveVertical => vec![PRESET_START, [0.3, 0.5], [0.3, 0.3]],
            PatternKind::Subtractive => vec![PRESET_START, [0.55, 0.45]],
        }
    }
}

fn default_jitter() -> f64 {
    0.02
}
fn default_samples_per_leg() -> usize {
    10
}
fn default_dwell_ms() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    #[serde(default)]
    pub kind: PatternKind,
    /// Anchors visited in order. Empty means the preset path of `kind`.
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default = "default_jitter")]
    pub jitter_sigma: f64,
    #[serde(default = "default_samples_per_leg")]
    pub samples_per_leg: usize,
    /// Mean interval between samples.
    #[serde(default = "default_dwell_ms")]
    pub dwell_ms: f64,
    /// Extra samples emitted at every anchor (pauses at each step).
    #[serde(default)]
    pub hold_samples: usize,
}

impl PatternSpec {
    pub fn preset(kind: PatternKind) -> PatternSpec {
        PatternSpec {
            kind,
            waypoints: kind.preset_waypoints(),
            jitter_sigma: default_jitter(),
            samples_per_leg: default_samples_per_leg(),
            dwell_ms: default_dwell_ms(),
            hold_samples: 3,
        }
    }

    pub fn path(waypoints: Vec<[f64; 2]>) -> PatternSpec {
        PatternSpec {
            waypoints,
            ..PatternSpec::preset(PatternKind::WaypointPath)
        }
    }

    pub fn resolved_waypoints(&self) -> Vec<[f64; 2]> {
        if self.waypoints.is_empty() {
            self.kind.preset_waypoints()
        } else {
            self.waypoints.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wps = self.resolved_waypoints();
        if wps.is_empty() {
            return Err(Error::invalid("pattern has no waypoints"));
        }
        if wps
            .iter()
            .flatten()
            .any(|c| !(0.0..=1.0).contains(c))
        {
            return Err(Error::invalid("waypoints must lie in [0,1]^2"));
        }
        if !(self.jitter_sigma >= 0.0) || !self.jitter_sigma.is_finite() {
            return Err(Error::invalid("jitter_sigma must be >= 0"));
        }
        if self.samples_per_leg == 0 {
            return Err(Error::invalid("samples_per_leg must be >= 1"));
        }
        if !(self.dwell_ms >= 0.0) || !self.dwell_ms.is_finite() {
            return Err(Error::invalid("dwell_ms must be >= 0"));
        }
        Ok(())
    }

    /// Noise-free sample positions: each anchor (held `hold_samples + 1`
    /// times) followed by `samples_per_leg` evenly spaced points of the next
    /// leg, the last of which is the next anchor.
    pub fn planned_positions(&self) -> Vec<[f64; 2]> {
        let wps = self.resolved_waypoints();
        let mut out = Vec::new();
        let hold = |out: &mut Vec<[f64; 2]>, p: [f64; 2]| {
            out.extend(std::iter::repeat_n(p, self.hold_samples));
        };
        if let Some(&first) = wps.first() {
            out.push(first);
            hold(&mut out, first);
        }
        for leg in wps.windows(2) {
            let (a, b) = (leg[0], leg[1]);
            for s in 1..=self.samples_per_leg {
                let f = s as f64 / self.samples_per_leg as f64;
                out.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
            }
            hold(&mut out, b);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionIds {
    pub session_id: String,
    pub student_id: String,
    pub question_id: String,
}

/// One synthetic session: jittered move events along the planned path with
/// dwell-spaced timestamps, then a submit carrying `score` if given.
pub fn gen_session(
    spec: &PatternSpec,
    ids: &SessionIds,
    score: Option<f64>,
    seed: u64,
) -> Result<Session> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.jitter_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut t: u64 = 0;
    let mut step = |rng: &mut ChaCha8Rng| -> u64 {
        let dt = (spec.dwell_ms * rng.random_range(0.5..1.5)).round() as u64;
        t += dt.max(1);
        t
    };
    let make = |kind: EventType, t_ms: u64, pos: Option<(f64, f64)>, score: Option<f64>| RawEvent {
        session_id: ids.session_id.clone(),
        student_id: ids.student_id.clone(),
        question_id: ids.question_id.clone(),
        event_type: kind,
        t_ms,
        x: pos.map(|p| p.0),
        y: pos.map(|p| p.1),
        score,
    };

    let mut events = Vec::new();
    for (k, p) in spec.planned_positions().into_iter().enumerate() {
        let x = (p[0] + noise.sample(&mut rng)).clamp(0.0, 1.0);
        let y = (p[1] + noise.sample(&mut rng)).clamp(0.0, 1.0);
        let t_ms = if k == 0 { 0 } else { step(&mut rng) };
        events.push(make(EventType::Move, t_ms, Some((x, y)), None));
    }
    if let Some(s) = score {
        let t_ms = step(&mut rng);
        events.push(make(EventType::Submit, t_ms, None, Some(s)));
    }
    Session::from_events(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    /// Mean normalized score at difficulty 0.
    pub intercept: f64,
    pub slope: f64,
    /// Per-question deviation of the mean score.
    pub noise_sigma: f64,
    /// Per-session deviation around the question mean.
    #[serde(default)]
    pub session_sigma: f64,
}

impl Default for ScoreModel {
    fn default() -> Self {
        ScoreModel {
            intercept: 0.95,
            slope: -0.1,
            noise_sigma: 0.03,
            session_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
#[derive(Default)]
pub enum OutcomeRule {
    /// Question mean from the score model, plus session noise.
    #[default]
    ScoreModel,
    /// Every session scores `score_norm * max_score`.
    Constant { score_norm: f64 },
    /// Full marks with probability `p_full`, else `wrong_score_norm`.
    Bernoulli { p_full: f64, wrong_score_norm: f64 },
    /// No submit event.
    NoSubmit,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionConfig {
    #[serde(flatten)]
    pub meta: QuestionMeta,
    /// Overrides the dataset-wide score model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_model: Option<ScoreModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub pattern: PatternSpec,
    pub session_count: usize,
    #[serde(default)]
    pub outcome: OutcomeRule,
    /// Questions this cohort answers; all questions when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub questions: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub questions: Vec<QuestionConfig>,
    #[serde(default)]
    pub score_model: ScoreModel,
    /// Questions whose written difficulty label is mirrored across the
    /// label range (`min + max - true`), while scores follow the true label.
    #[serde(default)]
    pub planted_mislabels: Vec<String>,
    #[serde(default)]
    pub cohorts: Vec<CohortConfig>,
}

impl DatasetConfig {
    pub fn from_reader<R: std::io::Read>(r: R) -> Result<DatasetConfig> {
        let cfg: DatasetConfig = serde_json::from_reader(r)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for q in &self.questions {
            q.meta.validate()?;
            if !ids.insert(q.meta.question_id.as_str()) {
                return Err(Error::invalid(format!("duplicate question {}", q.meta.question_id)));
            }
        }
        for m in &self.planted_mislabels {
            if !ids.contains(m.as_str()) {
                return Err(Error::invalid(format!("planted mislabel {m} is not a question")));
            }
        }
        for c in &self.cohorts {
            c.pattern.validate()?;
            for q in c.questions.iter().flatten() {
                if !ids.contains(q.as_str()) {
                    return Err(Error::invalid(format!("cohort references unknown question {q}")));
                }
            }
            match c.outcome {
                OutcomeRule::Constant { score_norm } if !(score_norm >= 0.0) => {
                    return Err(Error::invalid("constant score must be >= 0"))
                }
                OutcomeRule::Bernoulli { p_full, wrong_score_norm }
                    if !(0.0..=1.0).contains(&p_full) || !(wrong_score_norm >= 0.0) =>
                {
                    return Err(Error::invalid("bernoulli outcome needs p_full in [0,1]"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub events: Vec<RawEvent>,
    /// Metadata as written, i.e. with planted mislabels applied.
    pub metas: Vec<QuestionMeta>,
    /// Planted mean normalized score per question, in config order.
    pub question_means: Vec<f64>,
}

pub fn gen_dataset(config: &DatasetConfig) -> Result<GeneratedDataset> {
    config.validate()?;
    let planted: HashSet<&str> = config.planted_mislabels.iter().map(String::as_str).collect();
    let labels = config.questions.iter().map(|q| q.meta.difficulty_label);
    let (lo, hi) = (labels.clone().min().unwrap_or(1), labels.max().unwrap_or(1));

    let qseed = mix_seed(config.seed, QUESTION_DOMAIN);
    let mut question_means = Vec::with_capacity(config.questions.len());
    let mut metas = Vec::with_capacity(config.questions.len());
    for (qi, q) in config.questions.iter().enumerate() {
        let model = q.score_model.unwrap_or(config.score_model);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(qseed, qi as u64));
        let noise = Normal::new(0.0, model.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mean = model.intercept + model.slope * q.meta.difficulty_label as f64 + noise.sample(&mut rng);
        question_means.push(mean.clamp(0.0, 1.0));
        let mut meta = q.meta.clone();
        if planted.contains(meta.question_id.as_str()) {
            meta.difficulty_label = lo + hi - meta.difficulty_label;
        }
        metas.push(meta);
    }

    let mut events = Vec::new();
    let mut session_index: u64 = 0;
    for (ci, cohort) in config.cohorts.iter().enumerate() {
        for (qi, q) in config.questions.iter().enumerate() {
            let qid = &q.meta.question_id;
            if let Some(only) = &cohort.questions {
                if !only.contains(qid) {
                    continue;
                }
            }
            let model = q.score_model.unwrap_or(config.score_model);
            for k in 0..cohort.session_count {
                let seed = mix_seed(config.seed, session_index);
                session_index += 1;
                // outcome draws use their own stream so trajectories do not
                // depend on the outcome rule
                let mut orng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
                let norm = match cohort.outcome {
                    OutcomeRule::ScoreModel => {
                        let n = Normal::new(0.0, model.session_sigma)
                            .map_err(|e| Error::invalid(e.to_string()))?;
                        Some((question_means[qi] + n.sample(&mut orng)).clamp(0.0, 1.0))
                    }
                    OutcomeRule::Constant { score_norm } => Some(score_norm),
                    OutcomeRule::Bernoulli { p_full, wrong_score_norm } => {
                        Some(if orng.random_bool(p_full) { 1.0 } else { wrong_score_norm })
                    }
                    OutcomeRule::NoSubmit => None,
                };
                let ids = SessionIds {
                    session_id: format!("{qid}-c{ci}-{k:05}"),
                    student_id: format!("u{ci}-{k:05}"),
                    question_id: qid.clone(),
                };
                let session = gen_session(
                    &cohort.pattern,
                    &ids,
                    norm.map(|s| s * q.meta.max_score),
                    seed,
                )?;
                events.extend(session.events);
            }
        }
    }

    Ok(GeneratedDataset {
        events,
        metas,
        question_means,
    })
}

impl GeneratedDataset {
    pub fn write_files(&self, events_path: &Path, meta_path: &Path) -> Result<()> {
        let mut ev = BufWriter::new(File::create(events_path)?);
        write_event_log(&mut ev, &self.events)?;
        ev.flush()?;
        let mut meta = BufWriter::new(File::create(meta_path)?);
        serde_json::to_writer_pretty(&mut meta, &self.metas)?;
        meta.write_all(b"\n")?;
        meta.flush()?;
        Ok(())
    }
}

/// Shortest distance from a point to a polyline.
pub fn distance_to_path(p: [f64; 2], path: &[[f64; 2]]) -> f64 {
    match path {
        [] => f64::INFINITY,
        [only] => (p[0] - only[0]).hypot(p[1] - only[1]),
        _ => path
            .windows(2)
            .map(|seg| {
                let (a, b) = (seg[0], seg[1]);
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let len2 = dx * dx + dy * dy;
                let f = if len2 == 0.0 {
                    0.0
                } else {
                    (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
                };
                (p[0] - a[0] - f * dx).hypot(p[1] - a[1] - f * dy)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids() -> SessionIds {
        SessionIds {
            session_id: "s".into(),
            student_id: "u".into(),
            question_id: "q".into(),
        }
    }

    #[test]
    fn zero_noise_interpolation() {
        let spec = PatternSpec {
            jitter_sigma: 0.0,
            samples_per_leg: 5,
            hold_samples: 0,
            ..PatternSpec::path(vec![[0.1, 0.5], [0.9, 0.5]])
        };
        let s = gen_session(&spec, &ids(), Some(1.0), 7).unwrap();
        assert_eq!(s.events.len(), 7);
        let moves: Vec<_> = s.events[..6].iter().collect();
        assert!(moves.iter().all(|e| e.event_type == EventType::Move && e.y == Some(0.5)));
        assert!(moves.windows(2).all(|w| w[0].x < w[1].x));
        assert_eq!(s.events[6].event_type, EventType::Submit);
        assert_eq!(s.events[6].score, Some(1.0));
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = PatternSpec::preset(PatternKind::Subtractive);
        let a = gen_session(&spec, &ids(), Some(0.5), 42).unwrap();
        let b = gen_session(&spec, &ids(), Some(0.5), 42).unwrap();
        assert_eq!(a, b);
        let c = gen_session(&spec, &ids(), Some(0.5), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn timestamps_strictly_increase() {
        let spec = PatternSpec {
            dwell_ms: 0.0,
            ..PatternSpec::preset(PatternKind::AdditiveHorizontal)
        };
        let s = gen_session(&spec, &ids(), Some(1.0), 1).unwrap();
        assert!(s.events.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
    }

    #[test]
    fn empty_waypoints_rejected() {
        let spec = PatternSpec::path(vec![]);
        assert!(gen_session(&spec, &ids(), None, 0).is_err());
    }

    #[test]
    fn path_distance() {
        let path = [[0.0, 0.0], [1.0, 0.0]];
        assert!((distance_to_path([0.5, 0.3], &path) - 0.3).abs() < 1e-15);
        assert!((distance_to_path([-0.3, -0.4], &path) - 0.5).abs() < 1e-15);
        assert!((distance_to_path([0.3, 0.4], &[[0.0, 0.0]]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mislabels_are_mirrored() {
        let cfg = DatasetConfig {
            seed: 3,
            questions: (1..=5)
                .map(|d| QuestionConfig {
                    meta: QuestionMeta {
                        question_id: format!("q{d}"),
                        difficulty_label: d,
                        max_score: 1.0,
                        title: None,
                        background_image: None,
                    },
                    score_model: None,
                })
                .collect(),
            score_model: ScoreModel::default(),
            planted_mislabels: vec!["q1".into(), "q4".into()],
            cohorts: vec![],
        };
        let ds = gen_dataset(&cfg).unwrap();
        let labels: Vec<u32> = ds.metas.iter().map(|m| m.difficulty_label).collect();
        assert_eq!(labels, vec![5, 2, 3, 2, 5]);
        assert!(ds.events.is_empty());
    }

    #[test]
    fn unknown_mislabel_rejected() {
        let cfg: DatasetConfig = serde_json::from_str(
            r#"{"seed":1,"questions":[{"question_id":"a","difficulty":1,"max_score":1}],"planted_mislabels":["b"]}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }
}
