//! HTTP/JSON API over trailscope analytics.
//!
//! Every GET endpoint is a pure function of the current dataset snapshot
//! and its query string. Loading data publishes a new snapshot; requests
//! already in flight keep the one they started with.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use trailscope_core::event::{
    group_sessions, parse_event_log_with, parse_question_meta, ParseOptions, ParseReport,
};

pub mod error;
pub mod routes;
pub mod state;

pub use error::ApiError;
pub use state::{AppState, DatasetSnapshot};

const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/status", get(routes::status))
        .route("/questions", get(routes::questions))
        .route("/questions/{id}/heatmap", get(routes::heatmap))
        .route("/questions/{id}/transitions", get(routes::transitions))
        .route("/questions/{id}/compare", get(routes::compare))
        .route("/correlation", get(routes::correlation))
        .route("/ingest", post(routes::ingest))
        .route("/meta", post(routes::set_meta))
        .fallback(routes::api_not_found)
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES));
    let app = Router::new().nest("/api", api).with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(routes::api_not_found),
    }
}

/// Reads an event log (and optional metadata file) and publishes it as the
/// first snapshot. Returns the parse report without its events.
pub fn load_files(
    state: &AppState,
    events: &Path,
    meta: Option<&Path>,
    opts: ParseOptions,
) -> trailscope_core::Result<ParseReport> {
    let mut report = parse_event_log_with(BufReader::new(File::open(events)?), opts)?;
    let metas = match meta {
        Some(p) => Some(parse_question_meta(BufReader::new(File::open(p)?))?),
        None => None,
    };
    let events = std::mem::take(&mut report.events);
    let count = events.len();
    let snap = state.load(group_sessions(events), metas, count);
    tracing::info!(
        snapshot_id = snap.snapshot_id,
        events = count,
        sessions = snap.dataset.sessions().len(),
        questions = snap.dataset.metas().len(),
        errors = report.errors.len(),
        "dataset loaded"
    );
    Ok(report)
}

/// Serves `app` until ctrl-c.
pub async fn run(listener: TcpListener, app: Router) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!("listening on http://{addr}");
    }
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
