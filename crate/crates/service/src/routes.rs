use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::Json;
use trailscope_core::analytics::{CorrelationReport, DEFAULT_K_SIGMA};
use trailscope_core::api::{IngestResponse, StatusResponse};
use trailscope_core::event::{
    group_sessions, parse_canvas, parse_event_log_with, parse_question_meta, Cohort, ParseOptions,
};
use trailscope_core::pipeline::{
    HeatmapParams, HeatmapResult, QuestionSummary, TransitionParams, TransitionsResult,
};
use trailscope_core::transition::CohortDiff;

use crate::error::ApiError;
use crate::state::{AppState, DatasetSnapshot};

type Params = Result<Query<BTreeMap<String, String>>, QueryRejection>;
type ApiResult<T> = Result<Json<T>, ApiError>;

fn current(state: &AppState) -> Result<Arc<DatasetSnapshot>, ApiError> {
    state.snapshot().ok_or_else(ApiError::no_dataset)
}

fn query(params: Params) -> Result<BTreeMap<String, String>, ApiError> {
    params
        .map(|Query(q)| q)
        .map_err(|e| ApiError::invalid(e.body_text()))
}

fn param<T: FromStr>(q: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    q.get(key)
        .map(|raw| {
            raw.parse::<T>()
                .map_err(|_| ApiError::invalid(format!("bad value for {key}: {raw:?}")))
        })
        .transpose()
}

fn cohort_param(q: &BTreeMap<String, String>, key: &str) -> Result<Option<Cohort>, ApiError> {
    q.get(key)
        .map(|raw| raw.parse::<Cohort>().map_err(ApiError::from))
        .transpose()
}

fn heatmap_params(q: &BTreeMap<String, String>) -> Result<HeatmapParams, ApiError> {
    let d = HeatmapParams::default();
    Ok(HeatmapParams {
        res: param(q, "res")?.unwrap_or(d.res),
        sigma: param(q, "sigma")?.unwrap_or(d.sigma),
        cohort: cohort_param(q, "cohort")?.unwrap_or(d.cohort),
        dwell: param(q, "dwell")?.unwrap_or(d.dwell),
    })
}

fn transition_params(q: &BTreeMap<String, String>) -> Result<TransitionParams, ApiError> {
    let d = TransitionParams::default();
    Ok(TransitionParams {
        roi_size: param(q, "roi_size")?.unwrap_or(d.roi_size),
        tau: param(q, "tau")?.unwrap_or(d.tau),
        min_events: param(q, "min_events")?.unwrap_or(d.min_events),
        bins: param(q, "bins")?.unwrap_or(d.bins),
        min_edge: param(q, "min_edge")?.unwrap_or(d.min_edge),
        cohort: cohort_param(q, "cohort")?.unwrap_or(d.cohort),
        res: param(q, "res")?.unwrap_or(d.res),
        sigma: param(q, "sigma")?.unwrap_or(d.sigma),
    })
}

/// Runs CPU-bound analytics off the async workers.
async fn compute<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map(Json)
}

pub async fn status(State(state): State<Arc<AppState>>) -> Json<StatusResponse> {
    Json(match state.snapshot() {
        None => StatusResponse {
            loaded: false,
            snapshot_id: None,
            questions: 0,
            sessions: 0,
            events: 0,
        },
        Some(s) => StatusResponse {
            loaded: true,
            snapshot_id: Some(s.snapshot_id),
            questions: s.dataset.metas().len(),
            sessions: s.dataset.sessions().len(),
            events: s.event_count,
        },
    })
}

pub async fn questions(State(state): State<Arc<AppState>>) -> ApiResult<Vec<QuestionSummary>> {
    Ok(Json(current(&state)?.dataset.summaries()))
}

pub async fn heatmap(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Params,
) -> ApiResult<HeatmapResult> {
    let snap = current(&state)?;
    let params = heatmap_params(&query(params)?)?;
    compute(move || Ok(snap.dataset.heatmap(&id, &params)?)).await
}

pub async fn transitions(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Params,
) -> ApiResult<TransitionsResult> {
    let snap = current(&state)?;
    let params = transition_params(&query(params)?)?;
    compute(move || Ok(snap.dataset.transitions(&id, &params)?)).await
}

pub async fn compare(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Params,
) -> ApiResult<CohortDiff> {
    let snap = current(&state)?;
    let q = query(params)?;
    let params = transition_params(&q)?;
    let a = cohort_param(&q, "a")?.unwrap_or(Cohort::FullMarks);
    let b = cohort_param(&q, "b")?.unwrap_or(Cohort::Wrong);
    compute(move || Ok(snap.dataset.compare(&id, &params, a, b)?)).await
}

pub async fn correlation(
    State(state): State<Arc<AppState>>,
    params: Params,
) -> ApiResult<CorrelationReport> {
    let snap = current(&state)?;
    let k = param(&query(params)?, "k")?.unwrap_or(DEFAULT_K_SIGMA);
    compute(move || Ok(snap.dataset.correlation(k)?)).await
}

/// Replaces the event data with a JSON-lines body. Metadata supplied
/// earlier is kept.
pub async fn ingest(
    State(state): State<Arc<AppState>>,
    params: Params,
    body: Bytes,
) -> ApiResult<IngestResponse> {
    let canvas = match query(params)?.get("canvas") {
        Some(raw) => Some(parse_canvas(raw)?),
        None => None,
    };
    compute(move || {
        let report = parse_event_log_with(body.as_ref(), ParseOptions { canvas })
            .map_err(|e| ApiError::invalid(e.to_string()))?;
        let event_count = report.events.len();
        let snap = state.update(|prev| {
            let meta = prev.and_then(|p| p.explicit_meta.clone());
            (group_sessions(report.events), meta, event_count)
        });
        tracing::info!(
            snapshot_id = snap.snapshot_id,
            events = event_count,
            errors = report.errors.len(),
            "ingested event log"
        );
        Ok(IngestResponse {
            snapshot_id: snap.snapshot_id,
            events: event_count,
            sessions: snap.dataset.sessions().len(),
            warnings: report.warnings.len(),
            errors: report.errors,
        })
    })
    .await
}

/// Replaces question metadata, keeping the loaded sessions.
pub async fn set_meta(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<StatusResponse> {
    let metas = parse_question_meta(body.as_ref())?;
    compute(move || {
        let snap = state.update(|prev| match prev {
            Some(p) => (p.dataset.sessions().to_vec(), Some(metas), p.event_count),
            None => (Vec::new(), Some(metas), 0),
        });
        Ok(StatusResponse {
            loaded: true,
            snapshot_id: Some(snap.snapshot_id),
            questions: snap.dataset.metas().len(),
            sessions: snap.dataset.sessions().len(),
            events: snap.event_count,
        })
    })
    .await
}

pub async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}
