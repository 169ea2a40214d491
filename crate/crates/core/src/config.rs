//! Run configuration with layered resolution:
//! CLI flag > `PHENORAG_*` env var > config file > built-in default.
//!
//! Every key is settable at every layer under the same name; the env var is
//! the upper-cased key with a `PHENORAG_` prefix (`dense_k` is
//! `PHENORAG_DENSE_K`). API keys and the worker count are never serialized
//! into artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DEFAULT_CHUNK_SIZE, MIN_CHUNK_SIZE};
use crate::embedding::{DEFAULT_DIM, DEFAULT_MAX_TOKENS};
use crate::http::RetryPolicy;
use crate::llm::{RemoteChatConfig, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::model::{Strategy, Task};
use crate::pipeline::RunOptions;
use crate::promptkit::{DEFAULT_WINDOW, LIST_LENGTH, LONG_NOTE_WINDOW};
use crate::retrieval::{RetrievalSettings, DEFAULT_DENSE_K, DEFAULT_RERANK_KEEP};
use crate::embedding::RemoteEmbedConfig;

pub const ENV_PREFIX: &str = "PHENORAG_";
/// Context windows offered out of the box: standard and long-note.
pub const WINDOW_CHOICES: [usize; 2] = [DEFAULT_WINDOW, LONG_NOTE_WINDOW];
pub const DEFAULT_SEMANTIC_THRESHOLD: f64 = 0.90;
pub const DEFAULT_JOBS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config file {path}: {reason}")]
    File { path: String, reason: String },
    #[error("{var}: {reason}")]
    Env { var: String, reason: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Parsing of a single value from an env var.
pub trait EnvValue: Sized {
    fn parse_env(raw: &str) -> Result<Self, String>;
}

macro_rules! env_from_str {
    ($($t:ty),*) => {$(
        impl EnvValue for $t {
            fn parse_env(raw: &str) -> Result<Self, String> {
                raw.trim().parse::<$t>().map_err(|e| e.to_string())
            }
        }
    )*};
}
env_from_str!(usize, u64, u32, f64, Strategy, Task);

impl EnvValue for bool {
    fn parse_env(raw: &str) -> Result<Self, String> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "on" => Ok(true),
            "0" | "false" | "no" | "off" => Ok(false),
            other => Err(format!("`{other}` is not a boolean")),
        }
    }
}

impl EnvValue for String {
    fn parse_env(raw: &str) -> Result<Self, String> {
        Ok(raw.to_string())
    }
}

impl EnvValue for Option<String> {
    fn parse_env(raw: &str) -> Result<Self, String> {
        Ok((!raw.is_empty()).then(|| raw.to_string()))
    }
}

macro_rules! run_config {
    ($( $(#[$attr:meta])* $name:ident : $ty:ty = $default:expr; )*) => {
        /// Fully resolved settings for a run.
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub struct RunConfig {
            $( $(#[$attr])* pub $name: $ty, )*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $( $name: $default, )* }
            }
        }

        /// One configuration layer; `None` means "not set here".
        #[derive(Debug, Clone, Default, PartialEq, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct PartialConfig {
            $( #[serde(default)] pub $name: Option<$ty>, )*
        }

        impl PartialConfig {
            /// Keys known to every layer, in declaration order.
            pub const KEYS: &'static [&'static str] = &[$( stringify!($name), )*];

            /// Layers `higher` over `self`.
            pub fn overlay(self, higher: PartialConfig) -> PartialConfig {
                PartialConfig { $( $name: higher.$name.or(self.$name), )* }
            }

            /// Reads `PHENORAG_<KEY>` for every key through `lookup`.
            pub fn from_env_with(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
                let mut p = PartialConfig::default();
                $(
                    let var = format!("{ENV_PREFIX}{}", stringify!($name).to_ascii_uppercase());
                    if let Some(raw) = lookup(&var) {
                        p.$name = Some(<$ty as EnvValue>::parse_env(&raw)
                            .map_err(|reason| ConfigError::Env { var: var.clone(), reason })?);
                    }
                )*
                Ok(p)
            }
        }

        impl RunConfig {
            pub fn apply(&mut self, layer: &PartialConfig) {
                $( if let Some(v) = &layer.$name { self.$name = v.clone(); } )*
            }
        }
    };
}

run_config! {
    chunk_size: usize = DEFAULT_CHUNK_SIZE;
    dense_k: usize = DEFAULT_DENSE_K;
    rerank_keep: usize = DEFAULT_RERANK_KEEP;
    context_window: usize = DEFAULT_WINDOW;
    list_length: usize = LIST_LENGTH;
    strategy: Strategy = Strategy::Base;
    task: Task = Task::Gene;
    seed: u64 = 0;
    embed_dim: usize = DEFAULT_DIM;
    max_rerank_tokens: usize = DEFAULT_MAX_TOKENS;
    clamp_negative: bool = true;
    temperature: f64 = 0.0;
    max_output_tokens: usize = DEFAULT_MAX_OUTPUT_TOKENS;
    truncate_long_responses: bool = false;
    semantic_threshold: f64 = DEFAULT_SEMANTIC_THRESHOLD;
    llm_url: Option<String> = None;
    llm_model: String = String::new();
    #[serde(skip)]
    llm_key: Option<String> = None;
    llm_max_in_flight: usize = 4;
    embed_url: Option<String> = None;
    #[serde(skip)]
    embed_key: Option<String> = None;
    embed_batch_size: usize = 32;
    max_retries: u32 = 3;
    base_delay_ms: u64 = 500;
    max_delay_ms: u64 = 8_000;
    timeout_secs: u64 = 30;
    #[serde(skip)]
    jobs: usize = DEFAULT_JOBS;
}

impl PartialConfig {
    pub fn from_toml_str(raw: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let err = |reason: String| ConfigError::File {
            path: path.display().to_string(),
            reason,
        };
        let raw = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_toml_str(&raw).map_err(|e| err(e.to_string()))
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_env_with(|k| std::env::var(k).ok())
    }
}

impl RunConfig {
    /// Default, then file, then env, then CLI; validated.
    pub fn resolve(file: &PartialConfig, env: &PartialConfig, cli: &PartialConfig) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        c.apply(file);
        c.apply(env);
        c.apply(cli);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key, reason: String| Err(ConfigError::Invalid { key, reason });
        if self.chunk_size < MIN_CHUNK_SIZE {
            return bad("chunk_size", format!("must be at least {MIN_CHUNK_SIZE}"));
        }
        if self.dense_k == 0 {
            return bad("dense_k", "must be at least 1".into());
        }
        if self.rerank_keep == 0 || self.rerank_keep > self.dense_k {
            return bad("rerank_keep", format!("must be in 1..={}", self.dense_k));
        }
        if self.context_window == 0 {
            return bad("context_window", "must be positive".into());
        }
        if self.list_length != LIST_LENGTH {
            return bad("list_length", format!("prompts ask for exactly {LIST_LENGTH} items"));
        }
        if self.embed_dim == 0 {
            return bad("embed_dim", "must be positive".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature", "must be >= 0".into());
        }
        if !(self.semantic_threshold > 0.0 && self.semantic_threshold <= 1.0) {
            return bad("semantic_threshold", "must be in (0, 1]".into());
        }
        if self.jobs == 0 {
            return bad("jobs", "must be at least 1".into());
        }
        if self.llm_max_in_flight == 0 {
            return bad("llm_max_in_flight", "must be at least 1".into());
        }
        if self.embed_batch_size == 0 {
            return bad("embed_batch_size", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay_ms: self.base_delay_ms,
            max_delay_ms: self.max_delay_ms,
            timeout_secs: self.timeout_secs,
        }
    }

    pub fn retrieval_settings(&self) -> RetrievalSettings {
        RetrievalSettings {
            dense_k: self.dense_k,
            rerank_keep: self.rerank_keep,
            query_chunk_size: self.chunk_size,
            max_rerank_tokens: self.max_rerank_tokens,
            clamp_negative: self.clamp_negative,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            window: self.context_window,
            model_id: self.llm_model.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }

    pub fn remote_chat(&self) -> Option<RemoteChatConfig> {
        let url = self.llm_url.clone()?;
        Some(RemoteChatConfig {
            url,
            api_key: self.llm_key.clone(),
            max_in_flight: self.llm_max_in_flight,
            retry: self.retry_policy(),
        })
    }

    pub fn remote_embed(&self) -> Option<RemoteEmbedConfig> {
        let url = self.embed_url.clone()?;
        Some(RemoteEmbedConfig {
            url,
            api_key: self.embed_key.clone(),
            dim: self.embed_dim,
            batch_size: self.embed_batch_size,
            retry: self.retry_policy(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn toml_layer_and_unknown_keys() {
        let p = PartialConfig::from_toml_str("dense_k = 5\nstrategy = \"rag-cot\"\nllm_url = \"http://x\"\n").unwrap();
        assert_eq!(p.dense_k, Some(5));
        assert_eq!(p.strategy, Some(Strategy::RagCot));
        assert_eq!(p.llm_url, Some(Some("http://x".into())));
        assert!(PartialConfig::from_toml_str("dense_kk = 5").is_err());
    }

    #[test]
    fn env_layer() {
        let env: HashMap<&str, &str> = [
            ("PHENORAG_CHUNK_SIZE", "256"),
            ("PHENORAG_CLAMP_NEGATIVE", "off"),
            ("PHENORAG_LLM_KEY", "secret"),
            ("PHENORAG_TASK", "disease"),
        ]
        .into();
        let p = PartialConfig::from_env_with(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(p.chunk_size, Some(256));
        assert_eq!(p.clamp_negative, Some(false));
        assert_eq!(p.task, Some(Task::Disease));
        let c = RunConfig::resolve(&PartialConfig::default(), &p, &PartialConfig::default()).unwrap();
        assert_eq!(c.llm_key.as_deref(), Some("secret"));
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("secret"));
        assert!(!json.contains("jobs"));

        let bad = PartialConfig::from_env_with(|k| (k == "PHENORAG_DENSE_K").then(|| "x".to_string()));
        assert!(matches!(bad, Err(ConfigError::Env { .. })));
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.rerank_keep = 4;
        assert!(c.validate().is_err());
        c = RunConfig::default();
        c.semantic_threshold = 0.0;
        assert!(c.validate().is_err());
        c = RunConfig::default();
        c.list_length = 5;
        assert!(c.validate().is_err());
    }
}
