//! Response envelopes of the HTTP API that are not analytics results.

use serde::{Deserialize, Serialize};

use crate::event::LineError;

/// Body of every error response: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusResponse {
    pub loaded: bool,
    pub snapshot_id: Option<u64>,
    pub questions: usize,
    pub sessions: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub snapshot_id: u64,
    pub events: usize,
    pub sessions: usize,
    pub warnings: usize,
    pub errors: Vec<LineError>,
}
