//! Chat-completion abstraction.
//!
//! [`ChatModel`] is implemented by the providers ([`RemoteChatModel`],
//! [`ScriptedMock`]) and by [`ChatClient`], which wraps a provider with
//! request validation, output-length enforcement and transcript capture.

mod mock;
mod remote;
mod transcript;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenize::{Tokenizer, WordPunctTokenizer};

pub use mock::{load_script, parse_script, prompt_key, normalize_prompt, MatchRule, ScriptEntry, ScriptedMock};
pub use remote::{RemoteChatConfig, RemoteChatModel};
pub use transcript::{Transcript, TranscriptRecord};

pub const DEFAULT_MAX_OUTPUT_TOKENS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("chat provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("chat provider rejected credentials: {0}")]
    AuthFailure(String),
    #[error("response has {tokens} tokens, over the limit of {max}")]
    ResponseTooLong { tokens: usize, max: usize },
    #[error("no scripted response for prompt {key}")]
    UnscriptedPrompt { key: String },
    #[error("script error: {0}")]
    ScriptParseError(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("bad provider response: {0}")]
    BadResponse(String),
}

impl LlmError {
    /// Errors that should abort a batch rather than fail a single note.
    pub fn is_fatal(&self) -> bool {
        matches!(self, LlmError::ProviderUnavailable(_) | LlmError::AuthFailure(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub request_id: String,
}

impl ChatRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> Self {
        ChatRequest {
            system: system.into(),
            user: user.into(),
            model_id: String::new(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            request_id: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.user.trim().is_empty() {
            return Err(LlmError::InvalidRequest("user message is empty".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn prompt_key(&self) -> String {
        prompt_key(&self.system, &self.user)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub latency_ms: u64,
    #[serde(default)]
    pub provider_meta: BTreeMap<String, serde_json::Value>,
    pub from_mock: bool,
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<M: ChatModel + ?Sized> ChatModel for &M {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<M: ChatModel + ?Sized> ChatModel for Box<M> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<M: ChatModel + ?Sized> ChatModel for std::sync::Arc<M> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

/// Provider wrapper that validates requests, enforces the output limit and
/// appends every call to the transcript (if any).
pub struct ChatClient {
    provider: Box<dyn ChatModel>,
    transcript: Option<std::sync::Arc<Transcript>>,
    truncate_long_responses: bool,
}

impl ChatClient {
    pub fn new(provider: impl ChatModel + 'static) -> Self {
        ChatClient {
            provider: Box::new(provider),
            transcript: None,
            truncate_long_responses: false,
        }
    }

    pub fn with_transcript(mut self, transcript: std::sync::Arc<Transcript>) -> Self {
        self.transcript = Some(transcript);
        self
    }

    /// Cut over-long responses to `max_output_tokens` instead of failing.
    pub fn truncate_long_responses(mut self, yes: bool) -> Self {
        self.truncate_long_responses = yes;
        self
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_deref()
    }

    fn enforce_length(&self, req: &ChatRequest, mut resp: ChatResponse) -> Result<ChatResponse, LlmError> {
        let spans = WordPunctTokenizer.spans(&resp.text);
        if spans.len() <= req.max_output_tokens {
            return Ok(resp);
        }
        if !self.truncate_long_responses || req.max_output_tokens == 0 {
            return Err(LlmError::ResponseTooLong {
                tokens: spans.len(),
                max: req.max_output_tokens,
            });
        }
        let end = spans[req.max_output_tokens - 1].end;
        resp.text.truncate(end);
        resp.provider_meta.insert("truncated".into(), serde_json::Value::Bool(true));
        Ok(resp)
    }
}

impl ChatModel for ChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let result = request
            .validate()
            .and_then(|_| self.provider.complete(request))
            .and_then(|resp| {
                if resp.text.trim().is_empty() {
                    Err(LlmError::BadResponse("empty completion".into()))
                } else {
                    Ok(resp)
                }
            })
            .and_then(|resp| self.enforce_length(request, resp));
        if let Some(t) = &self.transcript {
            t.append(request, &result);
        }
        result
    }
}
