//! Knowledge-base ingest, token-budgeted chunking and corpus statistics.
//!
//! Two document sources feed the knowledge base: structured phenotype
//! records (one JSON object per line) and narrative disease texts (plain
//! text split on `#OMIM` header lines). Both are rendered to plain text and
//! cut into chunks of at most `chunk_size` tokens.

mod chunker;
mod ingest;
mod stats;
mod store;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunker::{chunk_document, chunk_document_with, split_text, TextPiece, MIN_CHUNK_SIZE};
pub use ingest::{
    parse_hpo_record, parse_hpo_records, parse_omim_records, parse_omim_text, IngestReject,
};
pub use stats::{compute_corpus_stats, compute_corpus_stats_with_bin_width, HistogramBin, LengthSummary};
pub use store::{read_chunk_store, write_chunk_store, StoreHeader, CHUNK_STORE_MAGIC, CHUNK_STORE_VERSION};

pub const DEFAULT_CHUNK_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    HpoRecord,
    OmimText,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::HpoRecord => "HPO_RECORD",
            Source::OmimText => "OMIM_TEXT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    Any,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "male",
            Sex::Female => "female",
            Sex::Any => "any",
        })
    }
}

/// One knowledge-base document before chunking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeDoc {
    pub doc_id: String,
    pub source: Source,
    /// Empty for narrative texts without a header title.
    pub disease_name: String,
    pub gene_symbols: Vec<String>,
    pub typical_age: Option<String>,
    pub sex: Option<Sex>,
    /// Organ system to phenotype terms, in input order. Only populated for
    /// structured records.
    pub phenotypes_by_system: Vec<(String, Vec<String>)>,
    pub body_text: String,
}

impl KnowledgeDoc {
    /// Plain text that gets chunked and embedded.
    ///
    /// Structured records render as labelled lines followed by the
    /// description paragraph; narrative texts are the title (if any) and the
    /// body.
    pub fn text(&self) -> String {
        match self.source {
            Source::HpoRecord => {
                let mut out = format!("Disease: {}\n", self.disease_name);
                if !self.gene_symbols.is_empty() {
                    out.push_str(&format!("Genes: {}\n", self.gene_symbols.join("/")));
                }
                if let Some(age) = &self.typical_age {
                    out.push_str(&format!("Typical age: {age}\n"));
                }
                if let Some(sex) = self.sex {
                    out.push_str(&format!("Sex: {sex}\n"));
                }
                out.push_str("Phenotypes:\n");
                for (system, terms) in &self.phenotypes_by_system {
                    out.push_str(&format!("{system}: {}\n", terms.join("; ")));
                }
                if !self.body_text.trim().is_empty() {
                    out.push('\n');
                    out.push_str(self.body_text.trim());
                    out.push('\n');
                }
                out
            }
            Source::OmimText => {
                if self.disease_name.is_empty() {
                    self.body_text.clone()
                } else {
                    format!("{}\n\n{}", self.disease_name, self.body_text)
                }
            }
        }
    }

    pub fn phenotype_count(&self) -> usize {
        self.phenotypes_by_system.iter().map(|(_, t)| t.len()).sum()
    }
}

/// A token-bounded slice of a knowledge document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub source: Source,
    pub text: String,
    pub token_count: usize,
    pub ordinal: usize,
    /// Byte offsets of `text` within the parent document's rendered text.
    pub start: usize,
    pub end: usize,
}

impl Chunk {
    pub fn make_id(doc_id: &str, ordinal: usize) -> String {
        format!("{doc_id}#{ordinal:05}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_chunks: usize,
    pub per_source_chunks: BTreeMap<Source, usize>,
    pub token_count_mean: f64,
    pub token_count_median: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub histogram: Vec<HistogramBin>,
    pub per_source: BTreeMap<Source, LengthSummary>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("malformed system block #{index}: {reason}")]
    MalformedSystemBlock { index: usize, reason: String },
    #[error("invalid value for `{field}`: {value:?}")]
    InvalidField { field: &'static str, value: String },
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("text does not start with an `#OMIM <accession> <title>` header")]
    MissingHeader,
    #[error("record `{0}` has an empty body")]
    EmptyBody(String),
    #[error("document `{0}` has no text")]
    EmptyDocument(String),
    #[error("chunk size {0} is below the minimum of {MIN_CHUNK_SIZE}")]
    InvalidChunkSize(usize),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("not a chunk store (expected `{CHUNK_STORE_MAGIC}` header)")]
    NotAChunkStore,
    #[error("unsupported chunk store version `{found}` (this build reads `{expected}`)")]
    UnsupportedVersion { found: String, expected: &'static str },
    #[error("chunk store line {line}: {reason}")]
    BadStoreRecord { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CorpusError {
    fn from(e: std::io::Error) -> Self {
        CorpusError::Io(e.to_string())
    }
}

/// Rejects duplicate document ids, keeping input order.
pub fn check_unique_ids(docs: &[KnowledgeDoc]) -> Result<(), CorpusError> {
    let mut seen = std::collections::HashSet::new();
    for d in docs {
        if !seen.insert(d.doc_id.as_str()) {
            return Err(CorpusError::DuplicateDocId(d.doc_id.clone()));
        }
    }
    Ok(())
}
