//! OpenAI-compatible chat-completions client.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ChatModel, ChatRequest, ChatResponse, LlmError};
use crate::http::{HttpFailure, JsonClient, RetryPolicy};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteChatConfig {
    /// Base URL (`.../v1`) or the full `/chat/completions` endpoint.
    pub url: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl RemoteChatConfig {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteChatConfig {
            url: url.into(),
            api_key: None,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            retry: RetryPolicy::default(),
        }
    }

    pub fn endpoint(&self) -> String {
        let base = self.url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct CompletionReply {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    model: Option<String>,
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteChatModel {
    config: RemoteChatConfig,
    client: JsonClient,
    gate: Gate,
}

impl RemoteChatModel {
    pub fn new(config: RemoteChatConfig) -> Result<Self, LlmError> {
        let client = JsonClient::new(config.retry.clone()).map_err(LlmError::ProviderUnavailable)?;
        let gate = Gate::new(config.max_in_flight);
        Ok(RemoteChatModel { config, client, gate })
    }
}

impl ChatModel for RemoteChatModel {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut messages = Vec::with_capacity(2);
        if !request.system.is_empty() {
            messages.push(Message {
                role: "system",
                content: &request.system,
            });
        }
        messages.push(Message {
            role: "user",
            content: &request.user,
        });
        let body = CompletionBody {
            model: &request.model_id,
            messages,
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let _permit = self.gate.acquire();
        let started = Instant::now();
        let reply: CompletionReply = self
            .client
            .post(&self.config.endpoint(), self.config.api_key.as_deref(), &body)
            .map_err(|f| match f {
                HttpFailure::Transient(m) => LlmError::ProviderUnavailable(m),
                HttpFailure::Auth(m) => LlmError::AuthFailure(m),
                HttpFailure::Fatal(m) => LlmError::BadResponse(m),
            })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        let choice = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::BadResponse("no choices in reply".into()))?;
        let text = choice
            .message
            .content
            .ok_or_else(|| LlmError::BadResponse("reply has no content".into()))?;
        let mut meta = BTreeMap::new();
        if let Some(id) = reply.id {
            meta.insert("id".into(), id.into());
        }
        if let Some(m) = reply.model {
            meta.insert("model".into(), m.into());
        }
        if let Some(r) = choice.finish_reason {
            meta.insert("finish_reason".into(), r.into());
        }
        if let Some(u) = reply.usage {
            meta.insert("usage".into(), u);
        }
        Ok(ChatResponse {
            text,
            latency_ms,
            provider_meta: meta,
            from_mock: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_forms() {
        assert_eq!(
            RemoteChatConfig::new("http://h/v1/").endpoint(),
            "http://h/v1/chat/completions"
        );
        assert_eq!(
            RemoteChatConfig::new("http://h/v1/chat/completions").endpoint(),
            "http://h/v1/chat/completions"
        );
    }

    #[test]
    fn unreachable_host_is_provider_unavailable() {
        let mut cfg = RemoteChatConfig::new("http://127.0.0.1:9");
        cfg.retry = RetryPolicy {
            max_retries: 1,
            base_delay_ms: 1,
            max_delay_ms: 1,
            timeout_secs: 2,
        };
        let m = RemoteChatModel::new(cfg).unwrap();
        let err = m.complete(&ChatRequest::new("", "hello")).unwrap_err();
        assert!(matches!(err, LlmError::ProviderUnavailable(_)), "{err:?}");
    }

    #[test]
    fn gate_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let gate = Gate::new(2);
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = gate.acquire();
                    let n = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(n, Ordering::SeqCst);
                    std::thread::sleep(std::time::Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
