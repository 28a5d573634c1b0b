//! Thin async client for the trailscope HTTP API.
//!
//! Typed methods decode the JSON bodies into the core result types; the
//! `*_raw` methods return the response body untouched.

use reqwest::{Response, StatusCode};
use serde::de::DeserializeOwned;
use trailscope_core::analytics::CorrelationReport;
use trailscope_core::api::{ErrorBody, IngestResponse, StatusResponse};
use trailscope_core::event::{Cohort, QuestionMeta};
use trailscope_core::pipeline::{
    HeatmapParams, HeatmapResult, QuestionSummary, TransitionParams, TransitionsResult,
};
use trailscope_core::transition::CohortDiff;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),

    /// The service answered with an error body.
    #[error("{status} {code}: {message}")]
    Api {
        status: StatusCode,
        code: String,
        message: String,
    },

    #[error("malformed response: {0}")]
    Decode(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

pub fn heatmap_query(p: &HeatmapParams) -> Vec<(&'static str, String)> {
    vec![
        ("res", p.res.to_string()),
        ("sigma", p.sigma.to_string()),
        ("cohort", p.cohort.to_string()),
        ("dwell", p.dwell.to_string()),
    ]
}

pub fn transition_query(p: &TransitionParams) -> Vec<(&'static str, String)> {
    vec![
        ("roi_size", p.roi_size.to_string()),
        ("tau", p.tau.to_string()),
        ("min_events", p.min_events.to_string()),
        ("bins", p.bins.to_string()),
        ("min_edge", p.min_edge.to_string()),
        ("cohort", p.cohort.to_string()),
        ("res", p.res.to_string()),
        ("sigma", p.sigma.to_string()),
    ]
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Client {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/api/{}", self.base, path.trim_start_matches('/'))
    }

    async fn check(resp: Response) -> Result<Vec<u8>> {
        let status = resp.status();
        let body = resp.bytes().await?.to_vec();
        if status.is_success() {
            return Ok(body);
        }
        Err(match serde_json::from_slice::<ErrorBody>(&body) {
            Ok(e) => ClientError::Api {
                status,
                code: e.error.code,
                message: e.error.message,
            },
            Err(_) => ClientError::Api {
                status,
                code: "http".to_string(),
                message: String::from_utf8_lossy(&body).into_owned(),
            },
        })
    }

    /// GET `/api/{path}` and return the body bytes as sent.
    pub async fn get_raw(&self, path: &str, query: &[(&str, String)]) -> Result<Vec<u8>> {
        let resp = self.http.get(self.url(path)).query(query).send().await?;
        Client::check(resp).await
    }

    async fn get_json<T: DeserializeOwned>(&self, path: &str, query: &[(&str, String)]) -> Result<T> {
        Ok(serde_json::from_slice(&self.get_raw(path, query).await?)?)
    }

    async fn post_json<T: DeserializeOwned>(
        &self,
        path: &str,
        query: &[(&str, String)],
        body: Vec<u8>,
    ) -> Result<T> {
        let resp = self
            .http
            .post(self.url(path))
            .query(query)
            .body(body)
            .send()
            .await?;
        Ok(serde_json::from_slice(&Client::check(resp).await?)?)
    }

    pub async fn status(&self) -> Result<StatusResponse> {
        self.get_json("status", &[]).await
    }

    pub async fn questions(&self) -> Result<Vec<QuestionSummary>> {
        self.get_json("questions", &[]).await
    }

    pub async fn heatmap(&self, question_id: &str, params: &HeatmapParams) -> Result<HeatmapResult> {
        self.get_json(&format!("questions/{question_id}/heatmap"), &heatmap_query(params))
            .await
    }

    pub async fn transitions(
        &self,
        question_id: &str,
        params: &TransitionParams,
    ) -> Result<TransitionsResult> {
        self.get_json(
            &format!("questions/{question_id}/transitions"),
            &transition_query(params),
        )
        .await
    }

    pub async fn compare(
        &self,
        question_id: &str,
        params: &TransitionParams,
        a: Cohort,
        b: Cohort,
    ) -> Result<CohortDiff> {
        let mut query = transition_query(params);
        query.push(("a", a.to_string()));
        query.push(("b", b.to_string()));
        self.get_json(&format!("questions/{question_id}/compare"), &query)
            .await
    }

    pub async fn correlation(&self, k: f64) -> Result<CorrelationReport> {
        self.get_json("correlation", &[("k", k.to_string())]).await
    }

    /// Replaces the server's events with a JSON-lines log.
    pub async fn ingest(&self, jsonl: Vec<u8>, canvas: Option<(f64, f64)>) -> Result<IngestResponse> {
        let query: Vec<(&str, String)> = canvas
            .map(|(w, h)| vec![("canvas", format!("{w}x{h}"))])
            .unwrap_or_default();
        self.post_json("ingest", &query, jsonl).await
    }

    pub async fn set_meta(&self, metas: &[QuestionMeta]) -> Result<StatusResponse> {
        self.post_json("meta", &[], serde_json::to_vec(metas)?).await
    }
}
