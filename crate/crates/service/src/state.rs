use std::sync::{Arc, Mutex, RwLock};

use trailscope_core::event::{QuestionMeta, Session};
use trailscope_core::pipeline::Dataset;

/// An immutable, published view of the loaded data.
#[derive(Debug)]
pub struct DatasetSnapshot {
    pub snapshot_id: u64,
    pub dataset: Dataset,
    /// Metadata as supplied by the operator; `None` when it was derived.
    pub explicit_meta: Option<Vec<QuestionMeta>>,
    pub event_count: usize,
}

/// Shared service state. Readers clone the current `Arc` and work on it
/// without holding any lock; writers are serialized and publish a new
/// snapshot with a single pointer swap.
#[derive(Debug, Default)]
pub struct AppState {
    current: RwLock<Option<Arc<DatasetSnapshot>>>,
    writer: Mutex<u64>,
}

impl AppState {
    pub fn new() -> Self {
        AppState::default()
    }

    pub fn snapshot(&self) -> Option<Arc<DatasetSnapshot>> {
        self.current.read().expect("state lock poisoned").clone()
    }

    /// Builds the next snapshot from the current one and publishes it.
    /// Returns the published snapshot.
    pub fn update<F>(&self, build: F) -> Arc<DatasetSnapshot>
    where
        F: FnOnce(Option<&DatasetSnapshot>) -> (Vec<Session>, Option<Vec<QuestionMeta>>, usize),
    {
        let mut last_id = self.writer.lock().expect("writer lock poisoned");
        let previous = self.snapshot();
        let (sessions, explicit_meta, event_count) = build(previous.as_deref());
        *last_id += 1;
        let snap = Arc::new(DatasetSnapshot {
            snapshot_id: *last_id,
            dataset: Dataset::new(sessions, explicit_meta.clone()),
            explicit_meta,
            event_count,
        });
        *self.current.write().expect("state lock poisoned") = Some(snap.clone());
        snap
    }

    pub fn load(&self, sessions: Vec<Session>, meta: Option<Vec<QuestionMeta>>, event_count: usize) -> Arc<DatasetSnapshot> {
        self.update(|_| (sessions, meta, event_count))
    }
}
