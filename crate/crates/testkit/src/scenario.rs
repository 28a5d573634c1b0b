//! Synthetic datasets with planted ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use trailscope_core::event::{EventType, QuestionMeta, RawEvent};
use trailscope_core::synthgen::{
    CohortConfig, DatasetConfig, OutcomeRule, PatternKind, PatternSpec, QuestionConfig, ScoreModel,
};

pub const ANCHOR_XS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
pub const ANCHOR_Y: f64 = 0.5;

pub fn meta(id: &str, difficulty: u32, max_score: f64) -> QuestionMeta {
    QuestionMeta {
        question_id: id.to_string(),
        difficulty_label: difficulty,
        max_score,
        title: None,
        background_image: None,
    }
}

/// Path visiting the four anchors left-to-right (or reversed), pausing at
/// each anchor.
pub fn anchor_pattern(left_to_right: bool, jitter: f64) -> PatternSpec {
    let mut wps: Vec<[f64; 2]> = ANCHOR_XS.iter().map(|&x| [x, ANCHOR_Y]).collect();
    if !left_to_right {
        wps.reverse();
    }
    PatternSpec {
        jitter_sigma: jitter,
        samples_per_leg: 5,
        hold_samples: 10,
        ..PatternSpec::path(wps)
    }
}

/// One question ("order"), `n` full-mark sessions solving left-to-right
/// and `n` wrong sessions solving right-to-left.
pub fn ordering_config(seed: u64, n: usize, jitter: f64) -> DatasetConfig {
    DatasetConfig {
        seed,
        questions: vec![QuestionConfig {
            meta: meta("order", 3, 2.0),
            score_model: None,
        }],
        score_model: ScoreModel::default(),
        planted_mislabels: vec![],
        cohorts: vec![
            CohortConfig {
                name: Some("left_to_right".into()),
                pattern: anchor_pattern(true, jitter),
                session_count: n,
                outcome: OutcomeRule::Constant { score_norm: 1.0 },
                questions: None,
            },
            CohortConfig {
                name: Some("right_to_left".into()),
                pattern: anchor_pattern(false, jitter),
                session_count: n,
                outcome: OutcomeRule::Constant { score_norm: 0.5 },
                questions: None,
            },
        ],
    }
}

/// Question ids whose labels the mislabel scenario mirrors: true labels 1,
/// 5 and 5, so one comes out easier and two harder than labeled.
pub const PLANTED_MISLABELS: [&str; 3] = ["q01", "q05", "q10"];

/// 30 questions, labels cycling 1..5, mean score `0.95 - 0.1 d + N(0, 0.03)`.
pub fn mislabel_config(seed: u64, planted: bool) -> DatasetConfig {
    DatasetConfig {
        seed,
        questions: (0..30)
            .map(|i| QuestionConfig {
                meta: meta(&format!("q{:02}", i + 1), 1 + (i % 5) as u32, 10.0),
                score_model: None,
            })
            .collect(),
        score_model: ScoreModel {
            intercept: 0.95,
            slope: -0.1,
            noise_sigma: 0.03,
            session_sigma: 0.0,
        },
        planted_mislabels: if planted {
            PLANTED_MISLABELS.iter().map(|s| s.to_string()).collect()
        } else {
            vec![]
        },
        cohorts: vec![CohortConfig {
            name: Some("students".into()),
            pattern: PatternSpec {
                samples_per_leg: 2,
                hold_samples: 0,
                ..PatternSpec::path(vec![[0.2, 0.2], [0.8, 0.8]])
            },
            session_count: 5,
            outcome: OutcomeRule::ScoreModel,
            questions: None,
        }],
    }
}

/// One drag-the-point question: `additive` sessions take the horizontal
/// additive path, `subtractive` sessions the subtractive one.
pub fn thinking_config(seed: u64, additive: usize, subtractive: usize) -> DatasetConfig {
    DatasetConfig {
        seed,
        questions: vec![QuestionConfig {
            meta: meta("area", 2, 1.0),
            score_model: None,
        }],
        score_model: ScoreModel::default(),
        planted_mislabels: vec![],
        cohorts: vec![
            CohortConfig {
                name: Some("additive".into()),
                pattern: PatternSpec::preset(PatternKind::AdditiveHorizontal),
                session_count: additive,
                outcome: OutcomeRule::Constant { score_norm: 1.0 },
                questions: None,
            },
            CohortConfig {
                name: Some("subtractive".into()),
                pattern: PatternSpec::preset(PatternKind::Subtractive),
                session_count: subtractive,
                outcome: OutcomeRule::Bernoulli {
                    p_full: 0.5,
                    wrong_score_norm: 0.0,
                },
                questions: None,
            },
        ],
    }
}

/// Gaussian blob of `n` points around `center`, clamped to the canvas.
pub fn cluster(rng: &mut ChaCha8Rng, center: (f64, f64), sigma: f64, n: usize) -> Vec<(f64, f64)> {
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    (0..n)
        .map(|_| {
            (
                (center.0 + noise.sample(rng)).clamp(0.0, 1.0),
                (center.1 + noise.sample(rng)).clamp(0.0, 1.0),
            )
        })
        .collect()
}

/// Random events of every type, positional ones uniformly or clustered.
pub fn random_events(seed: u64, n: usize) -> Vec<RawEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<(f64, f64)> = (0..rng.random_range(1..5))
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    (0..n)
        .map(|k| {
            let kind = EventType::ALL[rng.random_range(0..EventType::ALL.len())];
            let (x, y) = if rng.random_bool(0.3) {
                (rng.random::<f64>(), rng.random::<f64>())
            } else {
                let c = centers[rng.random_range(0..centers.len())];
                cluster(&mut rng, c, 0.05, 1)[0]
            };
            RawEvent {
                session_id: format!("s{}", rng.random_range(0..8)),
                student_id: "u".into(),
                question_id: "q".into(),
                event_type: kind,
                t_ms: k as u64 * 7 + rng.random_range(0..5),
                x: kind.is_positional().then_some(x),
                y: kind.is_positional().then_some(y),
                score: (kind == EventType::Submit).then(|| rng.random_range(0.0..10.0)),
            }
        })
        .collect()
}

/// Three single-cell ROIs on a 4x1 grid (ROI `k` in column `k`) and one
/// session per label sequence; `None` puts the event in column 3, outside
/// every ROI. Events are 10 ms apart.
pub fn labelled_sessions(
    sequences: &[Vec<Option<usize>>],
) -> (trailscope_core::roi::RoiSet, Vec<trailscope_core::event::Session>) {
    use trailscope_core::event::Session;
    use trailscope_core::roi::RoiSet;

    let rois = RoiSet::from_regions(4, 1, vec![vec![(0, 0)], vec![(1, 0)], vec![(2, 0)]], &[], 1)
        .expect("valid regions");
    let sessions = sequences
        .iter()
        .enumerate()
        .filter(|(_, seq)| !seq.is_empty())
        .map(|(s, seq)| {
            let events = seq
                .iter()
                .enumerate()
                .map(|(k, label)| RawEvent {
                    session_id: format!("s{s}"),
                    student_id: format!("u{s}"),
                    question_id: "q".into(),
                    event_type: EventType::Move,
                    t_ms: 10 * k as u64,
                    x: Some((label.unwrap_or(3) as f64 + 0.5) / 4.0),
                    y: Some(0.5),
                    score: None,
                })
                .collect();
            Session::from_events(events).expect("non-empty")
        })
        .collect();
    (rois, sessions)
}

/// Random label sequences: up to `max_sessions` sessions of up to
/// `max_events` events over `n_rois` ROIs (plus unlabeled events).
pub fn random_label_sequences(
    rng: &mut ChaCha8Rng,
    max_sessions: usize,
    max_events: usize,
    n_rois: usize,
) -> Vec<Vec<Option<usize>>> {
    (0..rng.random_range(1..=max_sessions))
        .map(|_| {
            (0..rng.random_range(1..=max_events))
                .map(|_| {
                    let v = rng.random_range(0..=n_rois);
                    (v < n_rois).then_some(v)
                })
                .collect()
        })
        .collect()
}
