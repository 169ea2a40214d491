//! Two-stage retrieval: exhaustive cosine search over chunk embeddings,
//! then late-interaction (MaxSim) reranking of the survivors.
//!
//! All orderings break score ties by ascending `chunk_id`, so results are
//! identical across platforms and thread counts.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Chunk, Source};
use crate::embedding::{embed_query, EmbedError, Embedder, EmbeddingVector, TokenEmbeddings};
use crate::Scalar;

pub const DEFAULT_DENSE_K: usize = 3;
pub const DEFAULT_RERANK_KEEP: usize = 1;
pub const INDEX_MAGIC: &str = "PHENORAG-INDEX";
pub const INDEX_VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("no rerank candidates")]
    EmptyCandidates,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("duplicate chunk id `{0}`")]
    DuplicateChunkId(String),
    #[error("index entry `{0}` has no chunk text")]
    MissingChunk(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("not an index file (expected `{INDEX_MAGIC}` header)")]
    NotAnIndex,
    #[error("unsupported index version `{found}` (this build reads `{expected}`)")]
    UnsupportedVersion { found: String, expected: &'static str },
    #[error("index line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("index fingerprint {stored} does not match corpus and embedder ({computed})")]
    FingerprintMismatch { stored: String, computed: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RetrievalError {
    fn from(e: std::io::Error) -> Self {
        RetrievalError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry<T> {
    pub chunk_id: String,
    pub vector: EmbeddingVector<T>,
}

/// Flat, immutable index scanned exhaustively at query time.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex<T> {
    entries: Vec<IndexEntry<T>>,
    dimension: usize,
    fingerprint: String,
    embedder: String,
}

/// A retrieved chunk. Dense fields are absent for results that only went
/// through reranking; `rerank_score` is absent before reranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk_id: String,
    pub dense_score: Option<f64>,
    pub rerank_score: Option<f64>,
    pub dense_rank: Option<usize>,
    pub final_rank: usize,
}

/// Fingerprint over the embedder descriptor and every (chunk_id, text).
pub fn corpus_fingerprint(chunks: &[Chunk], embedder_descriptor: &str) -> String {
    let mut h = Sha256::new();
    h.update(b"phenorag-index-v1\n");
    h.update(embedder_descriptor.as_bytes());
    h.update(b"\n");
    for c in chunks {
        h.update(c.chunk_id.as_bytes());
        h.update([0u8]);
        h.update(c.text.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn build_index<T: Scalar>(
    chunks: &[Chunk],
    embedder: &dyn Embedder<T>,
) -> Result<DenseIndex<T>, RetrievalError> {
    if chunks.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut seen = HashSet::new();
    for c in chunks {
        if !seen.insert(c.chunk_id.as_str()) {
            return Err(RetrievalError::DuplicateChunkId(c.chunk_id.clone()));
        }
    }
    let dimension = embedder.dimension();
    let mut entries = Vec::with_capacity(chunks.len());
    for batch in chunks.chunks(64) {
        let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
        let vectors = embedder.embed_texts(&texts)?;
        for (c, v) in batch.iter().zip(vectors) {
            if v.dim() != dimension {
                return Err(RetrievalError::DimensionMismatch {
                    expected: dimension,
                    found: v.dim(),
                });
            }
            entries.push(IndexEntry {
                chunk_id: c.chunk_id.clone(),
                vector: v,
            });
        }
    }
    Ok(DenseIndex {
        entries,
        dimension,
        fingerprint: corpus_fingerprint(chunks, &embedder.descriptor()),
        embedder: embedder.descriptor(),
    })
}

impl<T: Scalar> DenseIndex<T> {
    /// Assembles an index from precomputed vectors.
    pub fn from_entries(
        entries: Vec<IndexEntry<T>>,
        fingerprint: String,
        embedder: String,
    ) -> Result<Self, RetrievalError> {
        let dimension = entries.first().map(|e| e.vector.dim()).ok_or(RetrievalError::EmptyIndex)?;
        let mut seen = HashSet::new();
        for e in &entries {
            if e.vector.dim() != dimension {
                return Err(RetrievalError::DimensionMismatch {
                    expected: dimension,
                    found: e.vector.dim(),
                });
            }
            if !seen.insert(e.chunk_id.as_str()) {
                return Err(RetrievalError::DuplicateChunkId(e.chunk_id.clone()));
            }
        }
        Ok(DenseIndex {
            entries,
            dimension,
            fingerprint,
            embedder,
        })
    }

    pub fn entries(&self) -> &[IndexEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn embedder_descriptor(&self) -> &str {
        &self.embedder
    }

    /// Checks that this index was built from `chunks` with `embedder`.
    pub fn verify(&self, chunks: &[Chunk], embedder: &dyn Embedder<T>) -> Result<(), RetrievalError> {
        if embedder.dimension() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dimension,
                found: embedder.dimension(),
            });
        }
        let computed = corpus_fingerprint(chunks, &embedder.descriptor());
        if computed != self.fingerprint {
            return Err(RetrievalError::FingerprintMismatch {
                stored: self.fingerprint.clone(),
                computed,
            });
        }
        Ok(())
    }
}

fn by_score_then_id<T: Scalar>(a: (T, &str), b: (T, &str)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or_else(|| a.0.is_nan().cmp(&b.0.is_nan()))
        .then_with(|| a.1.cmp(b.1))
}

/// Top-`k` entries by cosine similarity to `query`.
pub fn dense_search<T: Scalar>(
    index: &DenseIndex<T>,
    query: &EmbeddingVector<T>,
    k: usize,
) -> Result<Vec<RetrievalResult>, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if query.dim() != index.dimension {
        return Err(RetrievalError::DimensionMismatch {
            expected: index.dimension,
            found: query.dim(),
        });
    }
    let mut scored: Vec<(T, &str)> = index
        .entries
        .iter()
        .map(|e| (query.cosine(&e.vector), e.chunk_id.as_str()))
        .collect();
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, |a, b| by_score_then_id(*a, *b));
        scored.truncate(k);
    }
    scored.sort_by(|a, b| by_score_then_id(*a, *b));
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (s, id))| RetrievalResult {
            chunk_id: id.to_string(),
            dense_score: Some(s.as_f64()),
            rerank_score: None,
            dense_rank: Some(i + 1),
            final_rank: i + 1,
        })
        .collect())
}

/// Sum over query tokens of the best cosine against any document token.
/// With `clamp_negative`, each per-token maximum is floored at zero.
pub fn maxsim_score<T: Scalar>(
    query: &TokenEmbeddings<T>,
    doc: &TokenEmbeddings<T>,
    clamp_negative: bool,
) -> T {
    query
        .vectors
        .iter()
        .map(|q| {
            let best = doc
                .vectors
                .iter()
                .map(|d| q.cosine(d))
                .fold(T::neg_infinity(), T::max);
            let best = if best == T::neg_infinity() { T::zero() } else { best };
            if clamp_negative {
                best.max(T::zero())
            } else {
                best
            }
        })
        .fold(T::zero(), |acc, s| acc + s)
}

/// Reranks candidates by MaxSim (negative per-token maxima clamped to 0)
/// and keeps the best `keep`.
pub fn maxsim_rerank<T: Scalar>(
    query_tokens: &TokenEmbeddings<T>,
    candidates: &[(String, TokenEmbeddings<T>)],
    keep: usize,
) -> Result<Vec<RetrievalResult>, RetrievalError> {
    maxsim_rerank_with(query_tokens, candidates, keep, true)
}

pub fn maxsim_rerank_with<T: Scalar>(
    query_tokens: &TokenEmbeddings<T>,
    candidates: &[(String, TokenEmbeddings<T>)],
    keep: usize,
    clamp_negative: bool,
) -> Result<Vec<RetrievalResult>, RetrievalError> {
    if candidates.is_empty() {
        return Err(RetrievalError::EmptyCandidates);
    }
    if keep == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if let Some(qd) = query_tokens.dim() {
        for (_, c) in candidates {
            for v in &c.vectors {
                if v.dim() != qd {
                    return Err(RetrievalError::DimensionMismatch {
                        expected: qd,
                        found: v.dim(),
                    });
                }
            }
        }
    }
    let mut scored: Vec<(T, &str)> = candidates
        .iter()
        .map(|(id, toks)| (maxsim_score(query_tokens, toks, clamp_negative), id.as_str()))
        .collect();
    scored.sort_by(|a, b| by_score_then_id(*a, *b));
    Ok(scored
        .into_iter()
        .take(keep)
        .enumerate()
        .map(|(i, (s, id))| RetrievalResult {
            chunk_id: id.to_string(),
            dense_score: None,
            rerank_score: Some(s.as_f64()),
            dense_rank: None,
            final_rank: i + 1,
        })
        .collect())
}

/// A retrieved chunk with the text and provenance needed for prompting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedChunk {
    pub result: RetrievalResult,
    pub doc_id: String,
    pub source: Source,
    pub text: String,
}

/// Anything that turns a query string into ranked context chunks.
pub trait ContextRetriever: Send + Sync {
    fn retrieve(&self, query: &str) -> Result<Vec<RetrievedChunk>, RetrievalError>;
}

impl<R: ContextRetriever + ?Sized> ContextRetriever for &R {
    fn retrieve(&self, query: &str) -> Result<Vec<RetrievedChunk>, RetrievalError> {
        (**self).retrieve(query)
    }
}

impl<R: ContextRetriever + ?Sized> ContextRetriever for Box<R> {
    fn retrieve(&self, query: &str) -> Result<Vec<RetrievedChunk>, RetrievalError> {
        (**self).retrieve(query)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSettings {
    pub dense_k: usize,
    pub rerank_keep: usize,
    /// Chunk size used to split long queries before averaging embeddings.
    pub query_chunk_size: usize,
    /// Token limit for late-interaction embeddings of query and candidates.
    pub max_rerank_tokens: usize,
    pub clamp_negative: bool,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        RetrievalSettings {
            dense_k: DEFAULT_DENSE_K,
            rerank_keep: DEFAULT_RERANK_KEEP,
            query_chunk_size: crate::corpus::DEFAULT_CHUNK_SIZE,
            max_rerank_tokens: crate::embedding::DEFAULT_MAX_TOKENS,
            clamp_negative: true,
        }
    }
}

/// Dense search followed by MaxSim rerank over the survivors' chunk text.
pub struct TwoStageRetriever<'a, T> {
    index: &'a DenseIndex<T>,
    chunks: HashMap<&'a str, &'a Chunk>,
    embedder: &'a dyn Embedder<T>,
    settings: RetrievalSettings,
}

impl<'a, T: Scalar> TwoStageRetriever<'a, T> {
    pub fn new(
        index: &'a DenseIndex<T>,
        chunks: &'a [Chunk],
        embedder: &'a dyn Embedder<T>,
        settings: RetrievalSettings,
    ) -> Result<Self, RetrievalError> {
        let map: HashMap<&str, &Chunk> = chunks.iter().map(|c| (c.chunk_id.as_str(), c)).collect();
        if let Some(e) = index.entries.iter().find(|e| !map.contains_key(e.chunk_id.as_str())) {
            return Err(RetrievalError::MissingChunk(e.chunk_id.clone()));
        }
        Ok(TwoStageRetriever {
            index,
            chunks: map,
            embedder,
            settings,
        })
    }

    pub fn settings(&self) -> &RetrievalSettings {
        &self.settings
    }

    /// embed(query) -> dense top-k -> token embeddings -> MaxSim keep.
    pub fn two_stage_retrieve(&self, query_text: &str) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if self.index.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let s = &self.settings;
        let query = embed_query(self.embedder, query_text, s.query_chunk_size)?;
        let dense = dense_search(self.index, &query, s.dense_k)?;

        let texts: Vec<&str> = dense
            .iter()
            .map(|r| {
                self.chunks
                    .get(r.chunk_id.as_str())
                    .map(|c| c.text.as_str())
                    .ok_or_else(|| RetrievalError::MissingChunk(r.chunk_id.clone()))
            })
            .collect::<Result<_, _>>()?;
        let cand_tokens = self.embedder.embed_tokens_batch(&texts, s.max_rerank_tokens)?;
        let candidates: Vec<(String, TokenEmbeddings<T>)> = dense
            .iter()
            .map(|r| r.chunk_id.clone())
            .zip(cand_tokens)
            .collect();
        let query_tokens = self.embedder.embed_tokens(query_text, s.max_rerank_tokens)?;
        let reranked =
            maxsim_rerank_with(&query_tokens, &candidates, s.rerank_keep, s.clamp_negative)?;

        Ok(reranked
            .into_iter()
            .map(|mut r| {
                if let Some(d) = dense.iter().find(|d| d.chunk_id == r.chunk_id) {
                    r.dense_score = d.dense_score;
                    r.dense_rank = d.dense_rank;
                }
                r
            })
            .collect())
    }
}

impl<T: Scalar> ContextRetriever for TwoStageRetriever<'_, T> {
    fn retrieve(&self, query: &str) -> Result<Vec<RetrievedChunk>, RetrievalError> {
        self.two_stage_retrieve(query)?
            .into_iter()
            .map(|result| {
                let c = self
                    .chunks
                    .get(result.chunk_id.as_str())
                    .ok_or_else(|| RetrievalError::MissingChunk(result.chunk_id.clone()))?;
                Ok(RetrievedChunk {
                    doc_id: c.doc_id.clone(),
                    source: c.source,
                    text: c.text.clone(),
                    result,
                })
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct IndexMeta {
    dim: usize,
    count: usize,
    fingerprint: String,
    embedder: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    extra: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct IndexRecord {
    chunk_id: String,
    dim: usize,
    values: Vec<f64>,
}

/// Writes `PHENORAG-INDEX v1 <meta json>` then one JSON record per entry.
/// Floats round-trip exactly.
pub fn write_index<T: Scalar, W: Write>(
    mut w: W,
    index: &DenseIndex<T>,
    extra: &serde_json::Value,
) -> Result<(), RetrievalError> {
    let meta = IndexMeta {
        dim: index.dimension,
        count: index.entries.len(),
        fingerprint: index.fingerprint.clone(),
        embedder: index.embedder.clone(),
        extra: extra.clone(),
    };
    let enc = |e: serde_json::Error| RetrievalError::Io(e.to_string());
    writeln!(w, "{INDEX_MAGIC} {INDEX_VERSION} {}", serde_json::to_string(&meta).map_err(enc)?)?;
    for e in &index.entries {
        let rec = IndexRecord {
            chunk_id: e.chunk_id.clone(),
            dim: e.vector.dim(),
            values: e.vector.values().iter().map(|v| v.as_f64()).collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec).map_err(enc)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index<T: Scalar, R: BufRead>(r: R) -> Result<DenseIndex<T>, RetrievalError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or(RetrievalError::NotAnIndex)??;
    let rest = first
        .strip_prefix(INDEX_MAGIC)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or(RetrievalError::NotAnIndex)?;
    let (version, meta) = rest.split_once(' ').unwrap_or((rest, ""));
    if version != INDEX_VERSION {
        return Err(RetrievalError::UnsupportedVersion {
            found: version.to_string(),
            expected: INDEX_VERSION,
        });
    }
    let meta: IndexMeta = serde_json::from_str(meta).map_err(|e| RetrievalError::BadRecord {
        line: 1,
        reason: e.to_string(),
    })?;
    let mut entries = Vec::with_capacity(meta.count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| RetrievalError::BadRecord { line: i + 2, reason };
        let rec: IndexRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if rec.dim != meta.dim || rec.values.len() != meta.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: meta.dim,
                found: if rec.dim != meta.dim { rec.dim } else { rec.values.len() },
            });
        }
        entries.push(IndexEntry {
            chunk_id: rec.chunk_id,
            vector: EmbeddingVector::new(rec.values.into_iter().map(T::from_f64_lossy).collect()),
        });
    }
    if entries.len() != meta.count {
        return Err(RetrievalError::BadRecord {
            line: 1,
            reason: format!("header declares {} entries, found {}", meta.count, entries.len()),
        });
    }
    DenseIndex::from_entries(entries, meta.fingerprint, meta.embedder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::MockEmbedder;

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            doc_id: id.split('#').next().unwrap().into(),
            source: Source::OmimText,
            text: text.into(),
            token_count: text.split_whitespace().count(),
            ordinal: 0,
            start: 0,
            end: text.len(),
        }
    }

    fn toks(vs: &[[f64; 3]]) -> TokenEmbeddings<f64> {
        TokenEmbeddings {
            tokens: (0..vs.len()).map(|i| format!("t{i}")).collect(),
            vectors: vs.iter().map(|v| EmbeddingVector::new(v.to_vec())).collect(),
            truncated: false,
        }
    }

    #[test]
    fn build_ten() {
        let e = MockEmbedder::<f64>::new(1);
        let chunks: Vec<_> = (0..10).map(|i| chunk(&format!("d{i}#00000"), &format!("text {i}"))).collect();
        let idx = build_index(&chunks, &e).unwrap();
        assert_eq!(idx.len(), 10);
        assert_eq!(idx.dimension(), 768);
        let again = build_index(&chunks, &e).unwrap();
        assert_eq!(idx.fingerprint(), again.fingerprint());
    }

    #[test]
    fn fingerprint_tracks_corpus_and_embedder() {
        let e = MockEmbedder::<f64>::new(1);
        let mut chunks: Vec<_> = (0..3).map(|i| chunk(&format!("d{i}#00000"), &format!("text {i}"))).collect();
        let a = build_index(&chunks, &e).unwrap();
        let mut bytes = chunks[1].text.clone().into_bytes();
        bytes[0] ^= 0x01;
        chunks[1].text = String::from_utf8(bytes).unwrap();
        let b = build_index(&chunks, &e).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        let c = build_index(&chunks, &MockEmbedder::<f64>::new(2)).unwrap();
        assert_ne!(b.fingerprint(), c.fingerprint());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = MockEmbedder::<f64>::new(1);
        let chunks = vec![chunk("a#0", "x"), chunk("a#0", "y")];
        assert_eq!(
            build_index(&chunks, &e).unwrap_err(),
            RetrievalError::DuplicateChunkId("a#0".into())
        );
    }

    #[test]
    fn self_similarity_and_clamping() {
        let e = MockEmbedder::<f64>::new(5);
        let chunks: Vec<_> = (0..4).map(|i| chunk(&format!("d{i}#0"), &format!("alpha{i} beta{i}"))).collect();
        let idx = build_index(&chunks, &e).unwrap();
        let q = idx.entries()[2].vector.clone();
        let r = dense_search(&idx, &q, 3).unwrap();
        assert_eq!(r[0].chunk_id, "d2#0");
        assert!((r[0].dense_score.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(r.len(), 3);
        assert_eq!(dense_search(&idx, &q, 100).unwrap().len(), 4);
    }

    #[test]
    fn dense_errors() {
        let e = MockEmbedder::<f64>::new(5);
        let idx = build_index(&[chunk("a#0", "x y")], &e).unwrap();
        let wrong = EmbeddingVector::new(vec![1.0, 0.0]);
        assert!(matches!(
            dense_search(&idx, &wrong, 3).unwrap_err(),
            RetrievalError::DimensionMismatch { expected: 768, found: 2 }
        ));
        let q = idx.entries()[0].vector.clone();
        assert_eq!(dense_search(&idx, &q, 0).unwrap_err(), RetrievalError::InvalidK);
    }

    #[test]
    fn ties_break_by_chunk_id() {
        let v = |x: f64| EmbeddingVector::new(vec![x, 1.0]);
        let idx = DenseIndex::from_entries(
            vec![
                IndexEntry { chunk_id: "c".into(), vector: v(0.0) },
                IndexEntry { chunk_id: "a".into(), vector: v(0.0) },
                IndexEntry { chunk_id: "b".into(), vector: v(0.0) },
            ],
            "fp".into(),
            "test".into(),
        )
        .unwrap();
        let r = dense_search(&idx, &v(0.0), 3).unwrap();
        let ids: Vec<_> = r.iter().map(|r| r.chunk_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn maxsim_identical_candidate() {
        let q = toks(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let other = toks(&[[1.0, 0.0, 0.0]]);
        let r = maxsim_rerank(&q, &[("b".into(), other), ("a".into(), q.clone())], 2).unwrap();
        assert_eq!(r[0].chunk_id, "a");
        assert!((r[0].rerank_score.unwrap() - 3.0).abs() < 1e-6);
        assert!((r[1].rerank_score.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn maxsim_by_hand() {
        // query q1=(1,0,0), q2=(0,1,0)
        // doc A: (1,1,0)/√2 and (0,0,1): max for q1 = 1/√2, q2 = 1/√2 -> √2
        // doc B: (1,0,0) and (0,-1,0):   q1 -> 1, q2 -> max(0,-1) = 0 -> 1
        let q = toks(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let a = toks(&[[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let b = toks(&[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]);
        let r = maxsim_rerank(&q, &[("A".into(), a), ("B".into(), b)], 2).unwrap();
        assert_eq!(r[0].chunk_id, "A");
        assert!((r[0].rerank_score.unwrap() - 2f64.sqrt()).abs() < 1e-6);
        assert!((r[1].rerank_score.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn maxsim_clamping_configurable() {
        let q = toks(&[[1.0, 0.0, 0.0]]);
        let d = toks(&[[-1.0, 0.0, 0.0]]);
        assert_eq!(maxsim_score(&q, &d, true), 0.0);
        assert_eq!(maxsim_score(&q, &d, false), -1.0);
    }

    #[test]
    fn maxsim_keep_one_of_three() {
        let q = toks(&[[1.0, 0.0, 0.0]]);
        let cands: Vec<_> = ["x", "y", "z"]
            .iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), toks(&[[1.0, i as f64, 0.0]])))
            .collect();
        let r = maxsim_rerank(&q, &cands, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].final_rank, 1);
        assert_eq!(r[0].chunk_id, "x");
    }

    #[test]
    fn maxsim_errors() {
        let q = toks(&[[1.0, 0.0, 0.0]]);
        assert_eq!(maxsim_rerank(&q, &[], 1).unwrap_err(), RetrievalError::EmptyCandidates);
        let bad = TokenEmbeddings {
            tokens: vec!["t".into()],
            vectors: vec![EmbeddingVector::new(vec![1.0, 0.0])],
            truncated: false,
        };
        assert!(matches!(
            maxsim_rerank(&q, &[("a".into(), bad)], 1).unwrap_err(),
            RetrievalError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn index_round_trip_is_exact() {
        let e = MockEmbedder::<f64>::new(11);
        let chunks: Vec<_> = (0..5).map(|i| chunk(&format!("d{i}#0"), &format!("gene{i} muscle"))).collect();
        let idx = build_index(&chunks, &e).unwrap();
        let mut buf = Vec::new();
        write_index(&mut buf, &idx, &serde_json::Value::Null).unwrap();
        let back: DenseIndex<f64> = read_index(&buf[..]).unwrap();
        assert_eq!(back, idx);
        back.verify(&chunks, &e).unwrap();
        assert!(matches!(
            back.verify(&chunks[..4], &e).unwrap_err(),
            RetrievalError::FingerprintMismatch { .. }
        ));
    }

    #[test]
    fn index_version_mismatch() {
        let err = read_index::<f64, _>("PHENORAG-INDEX v9 {}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, RetrievalError::UnsupportedVersion { .. }));
        let err = read_index::<f64, _>("PHENORAG-CHUNKS v1\n".as_bytes()).unwrap_err();
        assert_eq!(err, RetrievalError::NotAnIndex);
    }

    #[test]
    fn two_stage_picks_shared_vocabulary() {
        let e = MockEmbedder::<f64>::new(42);
        let chunks = vec![
            chunk("a#0", "polysplenia dextrocardia situs"),
            chunk("b#0", "nemaline rods hypotonia areflexia"),
            chunk("c#0", "hypothyroidism macrocephaly overgrowth"),
        ];
        let idx = build_index(&chunks, &e).unwrap();
        let r = TwoStageRetriever::new(&idx, &chunks, &e, RetrievalSettings::default()).unwrap();
        let out = r.two_stage_retrieve("infant with hypotonia and areflexia").unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].chunk_id, "b#0");
        assert_eq!(out[0].dense_rank, Some(1));
        assert!(out[0].rerank_score.unwrap() > 0.0);
    }

    #[test]
    fn two_stage_single_survivor_passes_through() {
        let e = MockEmbedder::<f64>::new(42);
        let chunks = vec![chunk("a#0", "alpha beta"), chunk("b#0", "gamma delta")];
        let idx = build_index(&chunks, &e).unwrap();
        let settings = RetrievalSettings {
            dense_k: 1,
            ..Default::default()
        };
        let r = TwoStageRetriever::new(&idx, &chunks, &e, settings).unwrap();
        let out = r.two_stage_retrieve("gamma").unwrap();
        let q = e.embed_text("gamma").unwrap();
        let dense = dense_search(&idx, &q, 1).unwrap();
        assert_eq!(out[0].chunk_id, dense[0].chunk_id);
        assert_eq!(out[0].dense_score, dense[0].dense_score);
    }
}
