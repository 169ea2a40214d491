use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    /// Position in the total order of calls for this transcript.
    pub seq: u64,
    pub request_id: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub request: ChatRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ChatResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Inner {
    next_seq: u64,
    sink: Option<BufWriter<File>>,
    records: Option<Vec<TranscriptRecord>>,
}

/// Append-only log of chat calls. Appends are serialized by a mutex, which
/// also fixes the `seq` order.
pub struct Transcript {
    inner: Mutex<Inner>,
}

impl Transcript {
    pub fn in_memory() -> Self {
        Transcript {
            inner: Mutex::new(Inner {
                next_seq: 0,
                sink: None,
                records: Some(Vec::new()),
            }),
        }
    }

    /// Appends JSON lines to `path`, creating it if needed.
    pub fn to_file(path: &Path) -> std::io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Transcript {
            inner: Mutex::new(Inner {
                next_seq: 0,
                sink: Some(BufWriter::new(f)),
                records: None,
            }),
        })
    }

    pub fn append(&self, request: &ChatRequest, result: &Result<ChatResponse, LlmError>) {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let mut inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        let rec = TranscriptRecord {
            seq: inner.next_seq,
            request_id: request.request_id.clone(),
            timestamp,
            request: request.clone(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        inner.next_seq += 1;
        if let Some(sink) = inner.sink.as_mut() {
            let line = serde_json::to_string(&rec).expect("transcript record serializes");
            // a failed transcript write must not fail the completion itself
            if writeln!(sink, "{line}").and_then(|_| sink.flush()).is_err() {
                eprintln!("warning: transcript write failed for {}", rec.request_id);
            }
        }
        if let Some(records) = inner.records.as_mut() {
            records.push(rec);
        }
    }

    /// In-memory records; empty for file-backed transcripts.
    pub fn records(&self) -> Vec<TranscriptRecord> {
        let inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        inner.records.clone().unwrap_or_default()
    }

    pub fn len(&self) -> u64 {
        self.inner.lock().unwrap_or_else(|p| p.into_inner()).next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_transcript_appends_json_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let t = Transcript::to_file(&path).unwrap();
        let mut req = ChatRequest::new("s", "u");
        req.request_id = "n1:base:1".into();
        t.append(&req, &Err(LlmError::ProviderUnavailable("down".into())));
        t.append(
            &req,
            &Ok(ChatResponse {
                text: "ok".into(),
                latency_ms: 3,
                provider_meta: Default::default(),
                from_mock: true,
            }),
        );
        drop(t);
        let lines: Vec<TranscriptRecord> = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].seq, 0);
        assert!(lines[0].error.is_some());
        assert_eq!(lines[1].response.as_ref().unwrap().text, "ok");
    }
}
