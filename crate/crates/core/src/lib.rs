//! Phenotype-driven gene prioritization and rare-disease diagnosis from
//! free-text clinical notes.
//!
//! The crate wires five inference strategies (base, chain-of-thought,
//! retrieval-augmented, and the two hybrid orderings) over a two-stage
//! retrieval stack: exhaustive cosine search over chunk embeddings followed
//! by late-interaction (MaxSim) reranking. Chat models and embedders are
//! pluggable; deterministic mocks ship alongside the HTTP clients so that
//! whole runs can be reproduced byte for byte.
//!
//! Vector math is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pick `f64`, which is what the pipeline and CLI use.

pub mod config;
pub mod corpus;
pub mod embedding;
pub mod evalharness;
mod http;
pub mod instrument;
pub mod llm;
mod model;
pub mod pipeline;
pub mod promptkit;
pub mod retrieval;
mod scalar;
pub mod tokenize;

pub use scalar::Scalar;

pub use config::RunConfig;
pub use http::RetryPolicy;
pub use model::{ClinicalNote, Dataset, Strategy, Task};
pub use corpus::{Chunk, CorpusStats, KnowledgeDoc, Source};
pub use evalharness::{AccuracyReport, EvalRecord, MatchConfig};
pub use llm::{ChatClient, ChatRequest, ChatResponse};
pub use pipeline::Prediction;
pub use promptkit::PromptBundle;
pub use retrieval::RetrievalResult;

/// Embedding vector at the pipeline's working precision.
pub type Embedding = embedding::EmbeddingVector<f64>;
/// Single-precision embedding vector.
pub type Embedding32 = embedding::EmbeddingVector<f32>;
/// Per-token embeddings at the pipeline's working precision.
pub type TokenEmbeddings = embedding::TokenEmbeddings<f64>;
/// Dense index at the pipeline's working precision.
pub type DenseIndex = retrieval::DenseIndex<f64>;
/// Deterministic hash-based embedder at the pipeline's working precision.
pub type MockEmbedder = embedding::MockEmbedder<f64>;
/// HTTP embedding client at the pipeline's working precision.
pub type RemoteEmbedder = embedding::RemoteEmbedder<f64>;
/// Two-stage retriever at the pipeline's working precision.
pub type TwoStageRetriever<'a> = retrieval::TwoStageRetriever<'a, f64>;

/// Version string embedded in every artifact this crate writes.
pub const TOOL_VERSION: &str = concat!("phenorag ", env!("CARGO_PKG_VERSION"));
