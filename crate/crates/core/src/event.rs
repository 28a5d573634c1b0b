//! Event log model: raw interaction records, sessions, question metadata and
//! outcome cohorts, plus the JSON-lines reader/writer.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Normalized scores at or above `1 - FULL_MARK_EPS` count as full marks.
pub const FULL_MARK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Move,
    Click,
    DragStart,
    Drag,
    DragEnd,
    AnswerChange,
    Submit,
}

impl EventType {
    pub const ALL: [EventType; 7] = [
        EventType::Move,
        EventType::Click,
        EventType::DragStart,
        EventType::Drag,
        EventType::DragEnd,
        EventType::AnswerChange,
        EventType::Submit,
    ];

    /// Positional events carry a pointer location.
    pub fn is_positional(self) -> bool {
        matches!(
            self,
            EventType::Move
                | EventType::Click
                | EventType::DragStart
                | EventType::Drag
                | EventType::DragEnd
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Move => "move",
            EventType::Click => "click",
            EventType::DragStart => "drag_start",
            EventType::Drag => "drag",
            EventType::DragEnd => "drag_end",
            EventType::AnswerChange => "answer_change",
            EventType::Submit => "submit",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the event log. Field names match the wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub session_id: String,
    pub student_id: String,
    pub question_id: String,
    #[serde(rename = "type")]
    pub event_type: EventType,
    #[serde(rename = "t")]
    pub t_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl RawEvent {
    /// Pointer location, present for every validated positional event.
    pub fn position(&self) -> Option<(f64, f64)> {
        if !self.event_type.is_positional() {
            return None;
        }
        Some((self.x?, self.y?))
    }

    pub fn is_positional(&self) -> bool {
        self.position().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    pub events: Vec<RawEvent>,
    pub errors: Vec<LineError>,
    pub warnings: Vec<LineWarning>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Canvas size in pixels; when set, raw x/y are divided by it before
    /// validation.
    pub canvas: Option<(f64, f64)>,
}

/// Parses a canvas size written as `WxH` (both positive).
pub fn parse_canvas(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::invalid(format!("canvas must look like WIDTHxHEIGHT, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: f64 = w.trim().parse().map_err(|_| bad())?;
    let h: f64 = h.trim().parse().map_err(|_| bad())?;
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(bad());
    }
    Ok((w, h))
}

/// Reads a JSON-lines event log. Malformed lines are reported per line and
/// skipped; only a failing reader aborts.
pub fn parse_event_log<R: BufRead>(input: R) -> std::io::Result<ParseReport> {
    parse_event_log_with(input, ParseOptions::default())
}

pub fn parse_event_log_with<R: BufRead>(
    input: R,
    opts: ParseOptions,
) -> std::io::Result<ParseReport> {
    let mut report = ParseReport::default();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, opts) {
            Ok((event, clamped)) => {
                if clamped {
                    report.warnings.push(LineWarning {
                        line: lineno,
                        message: "coordinates outside [0,1] clamped".to_string(),
                    });
                }
                report.events.push(event);
            }
            Err(reason) => report.errors.push(LineError {
                line: lineno,
                reason,
            }),
        }
    }
    Ok(report)
}

fn parse_line(line: &str, opts: ParseOptions) -> std::result::Result<(RawEvent, bool), String> {
    let mut ev: RawEvent = serde_json::from_str(line).map_err(|e| e.to_string())?;

    if let Some((w, h)) = opts.canvas {
        ev.x = ev.x.map(|x| x / w);
        ev.y = ev.y.map(|y| y / h);
    }

    if ev.event_type.is_positional() && (ev.x.is_none() || ev.y.is_none()) {
        return Err(format!("{} event requires x and y", ev.event_type));
    }
    match (ev.event_type, ev.score) {
        (EventType::Submit, None) => return Err("submit event requires score".to_string()),
        (EventType::Submit, Some(s)) if !(s >= 0.0) => {
            return Err(format!("score must be non-negative, got {s}"))
        }
        (t, Some(_)) if t != EventType::Submit => {
            return Err(format!("score is only allowed on submit, not {t}"))
        }
        _ => {}
    }

    let mut clamped = false;
    for c in [&mut ev.x, &mut ev.y].into_iter().flatten() {
        if !c.is_finite() {
            return Err("non-finite coordinate".to_string());
        }
        let v = c.clamp(0.0, 1.0);
        if v != *c {
            clamped = true;
            *c = v;
        }
    }
    Ok((ev, clamped))
}

/// Writes events in the log format, one JSON object per line.
pub fn write_event_log<W: Write>(mut out: W, events: &[RawEvent]) -> Result<()> {
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub session_id: String,
    pub student_id: String,
    pub question_id: String,
    pub events: Vec<RawEvent>,
    /// Score of the last submit, if any.
    pub outcome: Option<f64>,
    /// Normalized time order, parallel to `events`.
    pub t_norm: Vec<f64>,
}

impl Session {
    /// Builds a session from events that already share one session id.
    /// Events are stably sorted by time and `t_norm` is filled in.
    pub fn from_events(mut events: Vec<RawEvent>) -> Result<Session> {
        let first = events
            .first()
            .ok_or_else(|| Error::invalid("session has no events"))?;
        let session_id = first.session_id.clone();
        let student_id = first.student_id.clone();
        let question_id = first.question_id.clone();
        events.sort_by_key(|e| e.t_ms);
        let outcome = events
            .iter()
            .rev()
            .find(|e| e.event_type == EventType::Submit)
            .and_then(|e| e.score);
        normalize_time(Session {
            session_id,
            student_id,
            question_id,
            events,
            outcome,
            t_norm: Vec::new(),
        })
    }

    /// Outcome divided by the question's maximum score.
    pub fn normalized_score(&self, max_score: f64) -> Option<f64> {
        self.outcome.map(|s| s / max_score)
    }

    /// Positional events paired with their normalized time.
    pub fn positional(&self) -> impl Iterator<Item = (&RawEvent, f64)> + '_ {
        self.events
            .iter()
            .zip(self.t_norm.iter().copied())
            .filter(|(e, _)| e.is_positional())
    }
}

/// Partitions events by session id. Sessions come out ordered by their
/// earliest timestamp, ties by first appearance in the input.
pub fn group_sessions(events: Vec<RawEvent>) -> Vec<Session> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut buckets: Vec<Vec<RawEvent>> = Vec::new();
    for ev in events {
        match index.get(&ev.session_id) {
            Some(&i) => buckets[i].push(ev),
            None => {
                index.insert(ev.session_id.clone(), buckets.len());
                buckets.push(vec![ev]);
            }
        }
    }
    let mut sessions: Vec<Session> = buckets
        .into_iter()
        .map(|b| Session::from_events(b).expect("bucket is non-empty"))
        .collect();
    // stable: equal start times keep first-appearance order
    sessions.sort_by_key(|s| s.events[0].t_ms);
    sessions
}

/// Fills `t_norm` with each event's position in the session timeline
/// rescaled to [0,1]. Degenerate spans map every event to 0.
pub fn normalize_time(mut session: Session) -> Result<Session> {
    let (first, last) = match (session.events.first(), session.events.last()) {
        (Some(f), Some(l)) => (f.t_ms, l.t_ms),
        _ => return Err(Error::invalid("cannot normalize time of an empty session")),
    };
    let span = last.saturating_sub(first);
    session.t_norm = session
        .events
        .iter()
        .map(|e| {
            if span == 0 {
                0.0
            } else {
                (e.t_ms - first) as f64 / span as f64
            }
        })
        .collect();
    Ok(session)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionMeta {
    pub question_id: String,
    #[serde(rename = "difficulty")]
    pub difficulty_label: u32,
    pub max_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_image: Option<String>,
}

impl QuestionMeta {
    pub fn validate(&self) -> Result<()> {
        if self.difficulty_label < 1 {
            return Err(Error::invalid(format!(
                "question {}: difficulty must be >= 1",
                self.question_id
            )));
        }
        if !(self.max_score > 0.0) || !self.max_score.is_finite() {
            return Err(Error::invalid(format!(
                "question {}: max_score must be > 0",
                self.question_id
            )));
        }
        Ok(())
    }
}

/// Parses and validates the question metadata JSON array.
pub fn parse_question_meta<R: std::io::Read>(input: R) -> Result<Vec<QuestionMeta>> {
    let metas: Vec<QuestionMeta> = serde_json::from_reader(input)?;
    for m in &metas {
        m.validate()?;
    }
    Ok(metas)
}

/// Outcome-based session filter. Textual form: `all | full | wrong | range:lo-hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub enum Cohort {
    #[default]
    All,
    FullMarks,
    Wrong,
    ScoreRange { lo: f64, hi: f64 },
}

impl Cohort {
    pub fn range(lo: f64, hi: f64) -> Result<Cohort> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::invalid(format!(
                "score range requires 0 <= lo <= hi <= 1, got {lo}-{hi}"
            )));
        }
        Ok(Cohort::ScoreRange { lo, hi })
    }

    /// Sessions without an outcome only belong to `All`.
    pub fn contains(&self, normalized_score: Option<f64>) -> bool {
        match (self, normalized_score) {
            (Cohort::All, _) => true,
            (_, None) => false,
            (Cohort::FullMarks, Some(s)) => s >= 1.0 - FULL_MARK_EPS,
            (Cohort::Wrong, Some(s)) => s < 1.0 - FULL_MARK_EPS,
            (Cohort::ScoreRange { lo, hi }, Some(s)) => *lo <= s && s <= *hi,
        }
    }
}


impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cohort::All => f.write_str("all"),
            Cohort::FullMarks => f.write_str("full"),
            Cohort::Wrong => f.write_str("wrong"),
            Cohort::ScoreRange { lo, hi } => write!(f, "range:{lo}-{hi}"),
        }
    }
}

impl FromStr for Cohort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Cohort> {
        match s {
            "all" => Ok(Cohort::All),
            "full" => Ok(Cohort::FullMarks),
            "wrong" => Ok(Cohort::Wrong),
            _ => {
                let bounds = s.strip_prefix("range:").ok_or_else(|| {
                    Error::invalid(format!(
                        "unknown cohort {s:?}; expected all | full | wrong | range:lo-hi"
                    ))
                })?;
                let (lo, hi) = bounds
                    .split_once('-')
                    .ok_or_else(|| Error::invalid(format!("malformed range cohort {s:?}")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad range bound {v:?}")))
                };
                Cohort::range(parse(lo)?, parse(hi)?)
            }
        }
    }
}

impl Serialize for Cohort {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cohort {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
