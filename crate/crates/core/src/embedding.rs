//! Text and per-token embeddings behind a provider trait.
//!
//! [`MockEmbedder`] is a pure function of (text, seed): every token maps to a
//! pseudo-random unit vector drawn from a ChaCha stream keyed by
//! `sha256(seed || token)`, and a sentence embedding is the normalized sum of
//! its token vectors. Texts that share vocabulary therefore have positive
//! cosine similarity, while unrelated texts sit near zero.
//! [`RemoteEmbedder`] speaks a minimal JSON protocol to any HTTP service.

use std::marker::PhantomData;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::split_text;
use crate::http::{HttpFailure, JsonClient, RetryPolicy};
use crate::tokenize::{Tokenizer, WordPunctTokenizer};
use crate::Scalar;

pub const DEFAULT_DIM: usize = 768;
pub const DEFAULT_MAX_TOKENS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyInput,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding provider rejected credentials: {0}")]
    AuthFailure(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bad provider response: {0}")]
    BadResponse(String),
}

/// A dense vector with its Euclidean norm cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
    norm: T,
}

impl<T: Scalar> EmbeddingVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        let norm = values.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
        EmbeddingVector { values, norm }
    }

    /// Scales to unit norm. A zero vector is returned unchanged.
    pub fn normalized(values: Vec<T>) -> Self {
        let v = Self::new(values);
        if v.norm == T::zero() {
            return v;
        }
        Self::new(v.values.iter().map(|&x| x / v.norm).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn norm(&self) -> T {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.values, &other.values)
    }

    /// Cosine similarity clamped to [-1, 1]; 0 when either side is zero.
    pub fn cosine(&self, other: &Self) -> T {
        let denom = self.norm * other.norm;
        if denom == T::zero() {
            return T::zero();
        }
        let c = self.dot(other) / denom;
        c.max(-T::one()).min(T::one())
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingVector<U> {
        EmbeddingVector::new(self.values.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect())
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// One vector per token, truncated to the provider's sequence limit.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings<T> {
    pub tokens: Vec<String>,
    pub vectors: Vec<EmbeddingVector<T>>,
    pub truncated: bool,
}

impl<T: Scalar> TokenEmbeddings<T> {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(|v| v.dim())
    }
}

pub trait Embedder<T: Scalar>: Send + Sync {
    fn dimension(&self) -> usize;

    /// Identifies the provider configuration; feeds index fingerprints.
    fn descriptor(&self) -> String;

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<T>>, EmbedError>;

    fn embed_tokens_batch(
        &self,
        texts: &[&str],
        max_len: usize,
    ) -> Result<Vec<TokenEmbeddings<T>>, EmbedError>;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        let mut v = self.embed_texts(&[text])?;
        v.pop().ok_or_else(|| EmbedError::BadResponse("no vector returned".into()))
    }

    fn embed_tokens(&self, text: &str, max_len: usize) -> Result<TokenEmbeddings<T>, EmbedError> {
        let mut v = self.embed_tokens_batch(&[text], max_len)?;
        v.pop().ok_or_else(|| EmbedError::BadResponse("no token vectors returned".into()))
    }
}

impl<T: Scalar, E: Embedder<T> + ?Sized> Embedder<T> for &E {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<T>>, EmbedError> {
        (**self).embed_texts(texts)
    }
    fn embed_tokens_batch(
        &self,
        texts: &[&str],
        max_len: usize,
    ) -> Result<Vec<TokenEmbeddings<T>>, EmbedError> {
        (**self).embed_tokens_batch(texts, max_len)
    }
}

/// Embeds a query that may exceed the provider's window: the text is split
/// with the corpus chunker and the per-chunk vectors are averaged.
pub fn embed_query<T: Scalar>(
    embedder: &dyn Embedder<T>,
    text: &str,
    chunk_size: usize,
) -> Result<EmbeddingVector<T>, EmbedError> {
    let pieces = split_text(text, chunk_size, &WordPunctTokenizer);
    if pieces.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    if pieces.len() == 1 {
        return embedder.embed_text(text);
    }
    let slices: Vec<&str> = pieces.iter().map(|p| &text[p.start..p.end]).collect();
    let vectors = embedder.embed_texts(&slices)?;
    let dim = embedder.dimension();
    let mut mean = vec![T::zero(); dim];
    for v in &vectors {
        if v.dim() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                found: v.dim(),
            });
        }
        for (m, &x) in mean.iter_mut().zip(v.values()) {
            *m = *m + x;
        }
    }
    let n = T::from_usize(vectors.len()).unwrap_or_else(T::one);
    Ok(EmbeddingVector::new(mean.into_iter().map(|m| m / n).collect()))
}

/// Seeded hash of `text` expanded to a unit-norm vector of `DEFAULT_DIM`.
pub fn mock_embed<T: Scalar>(text: &str, seed: u64) -> EmbeddingVector<T> {
    mock_embed_dim(text, seed, DEFAULT_DIM)
}

pub fn mock_embed_dim<T: Scalar>(text: &str, seed: u64, dim: usize) -> EmbeddingVector<T> {
    let raw = mock_raw(text, seed, dim);
    EmbeddingVector::new(raw.into_iter().map(T::from_f64_lossy).collect())
}

/// Unit-norm f64 expansion; normalization happens at full precision.
fn mock_raw(text: &str, seed: u64, dim: usize) -> Vec<f64> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(text.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[derive(Debug, Clone)]
pub struct MockEmbedder<T> {
    seed: u64,
    dim: usize,
    _scalar: PhantomData<fn() -> T>,
}

impl<T: Scalar> MockEmbedder<T> {
    pub fn new(seed: u64) -> Self {
        Self::with_dim(seed, DEFAULT_DIM)
    }

    pub fn with_dim(seed: u64, dim: usize) -> Self {
        MockEmbedder {
            seed,
            dim,
            _scalar: PhantomData,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn token_key(token: &str) -> String {
        token.to_lowercase()
    }

    fn sentence(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        let tokens = WordPunctTokenizer.tokens(text);
        if tokens.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let mut acc = vec![0.0f64; self.dim];
        for t in tokens {
            for (a, x) in acc.iter_mut().zip(mock_raw(&Self::token_key(t), self.seed, self.dim)) {
                *a += x;
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(EmbeddingVector::new(
            acc.into_iter().map(|x| T::from_f64_lossy(x / norm)).collect(),
        ))
    }

    fn per_token(&self, text: &str, max_len: usize) -> Result<TokenEmbeddings<T>, EmbedError> {
        let tokens = WordPunctTokenizer.tokens(text);
        if tokens.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let truncated = tokens.len() > max_len;
        let kept = &tokens[..tokens.len().min(max_len)];
        Ok(TokenEmbeddings {
            tokens: kept.iter().map(|t| t.to_string()).collect(),
            vectors: kept
                .iter()
                .map(|t| mock_embed_dim(&Self::token_key(t), self.seed, self.dim))
                .collect(),
            truncated,
        })
    }
}

impl<T: Scalar> Embedder<T> for MockEmbedder<T> {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn descriptor(&self) -> String {
        format!("mock:seed={}:dim={}", self.seed, self.dim)
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<T>>, EmbedError> {
        texts.iter().map(|t| self.sentence(t)).collect()
    }

    fn embed_tokens_batch(
        &self,
        texts: &[&str],
        max_len: usize,
    ) -> Result<Vec<TokenEmbeddings<T>>, EmbedError> {
        texts.iter().map(|t| self.per_token(t, max_len)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RemoteEmbedConfig {
    pub url: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub dim: usize,
    pub batch_size: usize,
    pub retry: RetryPolicy,
}

impl RemoteEmbedConfig {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteEmbedConfig {
            url: url.into(),
            api_key: None,
            dim: DEFAULT_DIM,
            batch_size: 32,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
    mode: &'static str,
}

#[derive(Deserialize)]
struct SentenceResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct TokenResponse {
    dim: usize,
    token_vectors: Vec<Vec<Vec<f64>>>,
    tokens: Vec<Vec<String>>,
}

/// Client for the JSON embedding protocol:
/// `{"texts": [...], "mode": "sentence" | "tokens"}`.
pub struct RemoteEmbedder<T> {
    config: RemoteEmbedConfig,
    client: JsonClient,
    _scalar: PhantomData<fn() -> T>,
}

impl<T: Scalar> RemoteEmbedder<T> {
    pub fn new(config: RemoteEmbedConfig) -> Result<Self, EmbedError> {
        let client = JsonClient::new(config.retry.clone()).map_err(EmbedError::ProviderUnavailable)?;
        Ok(RemoteEmbedder {
            config,
            client,
            _scalar: PhantomData,
        })
    }

    fn post<R: for<'de> Deserialize<'de>>(&self, texts: &[&str], mode: &'static str) -> Result<R, EmbedError> {
        self.client
            .post(&self.config.url, self.config.api_key.as_deref(), &EmbedRequest { texts, mode })
            .map_err(|f| match f {
                HttpFailure::Transient(m) => EmbedError::ProviderUnavailable(m),
                HttpFailure::Auth(m) => EmbedError::AuthFailure(m),
                HttpFailure::Fatal(m) => EmbedError::BadResponse(m),
            })
    }

    fn check_dim(&self, found: usize) -> Result<(), EmbedError> {
        if found != self.config.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.config.dim,
                found,
            });
        }
        Ok(())
    }

    fn to_vector(&self, raw: Vec<f64>) -> Result<EmbeddingVector<T>, EmbedError> {
        self.check_dim(raw.len())?;
        Ok(EmbeddingVector::new(raw.into_iter().map(T::from_f64_lossy).collect()))
    }
}

fn reject_empty(texts: &[&str]) -> Result<(), EmbedError> {
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(EmbedError::EmptyInput);
    }
    Ok(())
}

impl<T: Scalar> Embedder<T> for RemoteEmbedder<T> {
    fn dimension(&self) -> usize {
        self.config.dim
    }

    fn descriptor(&self) -> String {
        format!("remote:{}:dim={}", self.config.url, self.config.dim)
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<T>>, EmbedError> {
        reject_empty(texts)?;
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.config.batch_size.max(1)) {
            let resp: SentenceResponse = self.post(batch, "sentence")?;
            self.check_dim(resp.dim)?;
            if resp.vectors.len() != batch.len() {
                return Err(EmbedError::BadResponse(format!(
                    "sent {} texts, received {} vectors",
                    batch.len(),
                    resp.vectors.len()
                )));
            }
            for v in resp.vectors {
                out.push(self.to_vector(v)?);
            }
        }
        Ok(out)
    }

    fn embed_tokens_batch(
        &self,
        texts: &[&str],
        max_len: usize,
    ) -> Result<Vec<TokenEmbeddings<T>>, EmbedError> {
        reject_empty(texts)?;
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.config.batch_size.max(1)) {
            let resp: TokenResponse = self.post(batch, "tokens")?;
            self.check_dim(resp.dim)?;
            if resp.token_vectors.len() != batch.len() || resp.tokens.len() != batch.len() {
                return Err(EmbedError::BadResponse("token batch length mismatch".into()));
            }
            for (tokens, vectors) in resp.tokens.into_iter().zip(resp.token_vectors) {
                if tokens.len() != vectors.len() {
                    return Err(EmbedError::BadResponse(format!(
                        "{} tokens but {} vectors",
                        tokens.len(),
                        vectors.len()
                    )));
                }
                if tokens.is_empty() {
                    return Err(EmbedError::EmptyInput);
                }
                let truncated = tokens.len() > max_len;
                let mut vecs = Vec::with_capacity(tokens.len().min(max_len));
                for v in vectors.into_iter().take(max_len) {
                    vecs.push(self.to_vector(v)?);
                }
                out.push(TokenEmbeddings {
                    tokens: tokens.into_iter().take(max_len).collect(),
                    vectors: vecs,
                    truncated,
                });
            }
        }
        Ok(out)
    }
}
