//! Provider wrappers that log external actions, for checking the order in
//! which strategies call retrieval and the model.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::llm::{ChatModel, ChatRequest, ChatResponse, LlmError};
use crate::retrieval::{ContextRetriever, RetrievalError, RetrievedChunk};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Retrieve,
    LlmCall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Retrieval query or request id.
    pub detail: String,
}

#[derive(Debug, Default)]
pub struct EventLog {
    events: Mutex<Vec<Event>>,
}

impl EventLog {
    pub fn new() -> Arc<Self> {
        Arc::new(EventLog::default())
    }

    pub fn push(&self, kind: EventKind, detail: impl Into<String>) {
        self.events
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(Event { kind, detail: detail.into() });
    }

    pub fn events(&self) -> Vec<Event> {
        self.events.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn kinds(&self) -> Vec<EventKind> {
        self.events().into_iter().map(|e| e.kind).collect()
    }

    pub fn clear(&self) {
        self.events.lock().unwrap_or_else(|p| p.into_inner()).clear();
    }
}

/// Logs an [`EventKind::LlmCall`] before delegating.
pub struct RecordingChat<M> {
    inner: M,
    log: Arc<EventLog>,
}

impl<M: ChatModel> RecordingChat<M> {
    pub fn new(inner: M, log: Arc<EventLog>) -> Self {
        RecordingChat { inner, log }
    }
}

impl<M: ChatModel> ChatModel for RecordingChat<M> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.log.push(EventKind::LlmCall, request.request_id.clone());
        self.inner.complete(request)
    }
}

/// Logs an [`EventKind::Retrieve`] before delegating.
pub struct RecordingRetriever<R> {
    inner: R,
    log: Arc<EventLog>,
}

impl<R: ContextRetriever> RecordingRetriever<R> {
    pub fn new(inner: R, log: Arc<EventLog>) -> Self {
        RecordingRetriever { inner, log }
    }
}

impl<R: ContextRetriever> ContextRetriever for RecordingRetriever<R> {
    fn retrieve(&self, query: &str) -> Result<Vec<RetrievedChunk>, RetrievalError> {
        self.log.push(EventKind::Retrieve, query);
        self.inner.retrieve(query)
    }
}
