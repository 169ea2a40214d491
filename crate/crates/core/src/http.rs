//! Blocking JSON-over-HTTP with exponential backoff, shared by the remote
//! embedding and chat clients.

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
            timeout_secs: 30,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): base * 2^attempt, capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum HttpFailure {
    /// Connection errors, timeouts, 429 and 5xx. Retried.
    Transient(String),
    /// 401 / 403. Not retried.
    Auth(String),
    /// Other 4xx and undecodable bodies. Not retried.
    Fatal(String),
}

pub(crate) struct JsonClient {
    client: reqwest::blocking::Client,
    policy: RetryPolicy,
}

impl JsonClient {
    pub fn new(policy: RetryPolicy) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(policy.timeout_secs))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(JsonClient { client, policy })
    }

    /// POSTs `body` and decodes the JSON response, retrying transient
    /// failures per the policy. Returns the last failure once retries are
    /// exhausted.
    pub fn post<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &B,
    ) -> Result<R, HttpFailure> {
        let mut attempt = 0;
        loop {
            match self.post_once(url, bearer, body) {
                Err(HttpFailure::Transient(msg)) if attempt < self.policy.max_retries => {
                    log_retry(url, attempt, &msg);
                    std::thread::sleep(self.policy.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_once<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &B,
    ) -> Result<R, HttpFailure> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| HttpFailure::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(HttpFailure::Auth(format!("HTTP {status}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(HttpFailure::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(HttpFailure::Fatal(format!("HTTP {status}: {text}")));
        }
        resp.json::<R>()
            .map_err(|e| HttpFailure::Fatal(format!("undecodable response: {e}")))
    }
}

fn log_retry(url: &str, attempt: u32, msg: &str) {
    if std::env::var_os("PHENORAG_QUIET").is_none() {
        eprintln!("warning: {url}: {msg}; retry {}", attempt + 1);
    }
}
