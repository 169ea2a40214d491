//! Scripted mock chat model.
//!
//! A script is a JSON list of entries (or an object with `entries` and an
//! optional `fallback`). Each entry matches either the SHA-256 of the
//! whitespace-normalized prompt or one or more substrings of it:
//!
//! ```json
//! {"entries": [
//!    {"match": {"prompt_sha256": "9f2c..."}, "response": "..."},
//!    {"match": {"contains": ["genetic counselor", "polysplenia"]}, "response": "..."}
//!  ],
//!  "fallback": "POTENTIAL_GENES:\n1. 'TTN'"}
//! ```
//!
//! Hash entries win over substring entries; substring entries are tried in
//! file order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatModel, ChatRequest, ChatResponse, LlmError};

/// Collapses every whitespace run to a single space and trims.
pub fn normalize_prompt(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Script key for a (system, user) pair.
pub fn prompt_key(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update(normalize_prompt(system).as_bytes());
    h.update(b"\n");
    h.update(normalize_prompt(user).as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Needles {
    One(String),
    All(Vec<String>),
}

impl Needles {
    fn normalized(&self) -> Vec<String> {
        match self {
            Needles::One(s) => vec![normalize_prompt(s)],
            Needles::All(v) => v.iter().map(|s| normalize_prompt(s)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<Needles>,
}

impl MatchRule {
    pub fn sha(key: impl Into<String>) -> Self {
        MatchRule {
            prompt_sha256: Some(key.into()),
            contains: None,
        }
    }

    pub fn contains_all<S: Into<String>>(needles: impl IntoIterator<Item = S>) -> Self {
        MatchRule {
            prompt_sha256: None,
            contains: Some(Needles::All(needles.into_iter().map(Into::into).collect())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub rule: MatchRule,
    pub response: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    List(Vec<ScriptEntry>),
    Object {
        entries: Vec<ScriptEntry>,
        #[serde(default)]
        fallback: Option<String>,
    },
}

/// Answers prompts by exact key lookup, then substring rules, then the
/// fallback. Without a fallback, unmatched prompts fail with
/// [`LlmError::UnscriptedPrompt`].
#[derive(Debug, Clone, Default)]
pub struct ScriptedMock {
    by_key: HashMap<String, String>,
    by_contains: Vec<(Vec<String>, String)>,
    fallback: Option<String>,
}

impl ScriptedMock {
    pub fn from_entries(entries: Vec<ScriptEntry>, fallback: Option<String>) -> Result<Self, LlmError> {
        let mut mock = ScriptedMock {
            fallback,
            ..Default::default()
        };
        let mut seen_contains = HashSet::new();
        for (i, e) in entries.into_iter().enumerate() {
            match (e.rule.prompt_sha256, e.rule.contains) {
                (Some(key), None) => {
                    let key = key.trim().to_ascii_lowercase();
                    if key.len() != 64 || !key.chars().all(|c| c.is_ascii_hexdigit()) {
                        return Err(LlmError::ScriptParseError(format!(
                            "entry {i}: prompt_sha256 is not a sha256 hex digest"
                        )));
                    }
                    if mock.by_key.insert(key.clone(), e.response).is_some() {
                        return Err(LlmError::ScriptParseError(format!("entry {i}: duplicate key {key}")));
                    }
                }
                (None, Some(needles)) => {
                    let needles = needles.normalized();
                    if needles.is_empty() || needles.iter().any(|n| n.is_empty()) {
                        return Err(LlmError::ScriptParseError(format!("entry {i}: empty `contains`")));
                    }
                    if !seen_contains.insert(needles.clone()) {
                        return Err(LlmError::ScriptParseError(format!(
                            "entry {i}: duplicate `contains` rule"
                        )));
                    }
                    mock.by_contains.push((needles, e.response));
                }
                _ => {
                    return Err(LlmError::ScriptParseError(format!(
                        "entry {i}: match needs exactly one of `prompt_sha256` or `contains`"
                    )))
                }
            }
        }
        Ok(mock)
    }

    pub fn len(&self) -> usize {
        self.by_key.len() + self.by_contains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    fn lookup(&self, system: &str, user: &str) -> Result<(&str, &'static str), LlmError> {
        let key = prompt_key(system, user);
        if let Some(r) = self.by_key.get(&key) {
            return Ok((r, "sha256"));
        }
        if !self.by_contains.is_empty() {
            let text = format!("{}\n{}", normalize_prompt(system), normalize_prompt(user));
            for (needles, resp) in &self.by_contains {
                if needles.iter().all(|n| text.contains(n.as_str())) {
                    return Ok((resp, "contains"));
                }
            }
        }
        match &self.fallback {
            Some(f) => Ok((f, "fallback")),
            None => Err(LlmError::UnscriptedPrompt { key }),
        }
    }
}

impl ChatModel for ScriptedMock {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let (text, how) = self.lookup(&request.system, &request.user)?;
        let mut meta = BTreeMap::new();
        meta.insert("matched_by".to_string(), serde_json::Value::from(how));
        Ok(ChatResponse {
            text: text.to_string(),
            latency_ms: 0,
            provider_meta: meta,
            from_mock: true,
        })
    }
}

pub fn parse_script(json: &str) -> Result<ScriptedMock, LlmError> {
    let file: ScriptFile =
        serde_json::from_str(json).map_err(|e| LlmError::ScriptParseError(e.to_string()))?;
    match file {
        ScriptFile::List(entries) => ScriptedMock::from_entries(entries, None),
        ScriptFile::Object { entries, fallback } => ScriptedMock::from_entries(entries, fallback),
    }
}

pub fn load_script(path: &Path) -> Result<ScriptedMock, LlmError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| LlmError::ScriptParseError(format!("{}: {e}", path.display())))?;
    parse_script(&raw)
}
