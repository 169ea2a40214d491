//! The five inference strategies and model-output parsing.
//!
//! | strategy | external actions, in order |
//! |----------|----------------------------|
//! | base     | llm                        |
//! | cot      | llm                        |
//! | rag      | retrieve, llm              |
//! | rag-cot  | retrieve, llm              |
//! | cot-rag  | llm, retrieve, llm         |

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbedError;
use crate::llm::{ChatModel, ChatRequest, LlmError, DEFAULT_MAX_OUTPUT_TOKENS};
pub use crate::model::{ClinicalNote, Dataset, Strategy, Task};
use crate::promptkit::{
    assemble_base_prompt, assemble_cot_prompt, assemble_finalize_prompt, inject_context, organ_system_position,
    ContextChunk, PromptBundle, PromptError, DEFAULT_WINDOW, LIST_LENGTH, ORGAN_SYSTEMS, UNCLASSIFIED,
};
use crate::retrieval::{ContextRetriever, RetrievalError, RetrievalResult, RetrievedChunk};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("no ranked list could be recovered from the model output")]
    ParseFailure { reasoning: String },
    #[error("step 1 of the reasoning has no classified terms")]
    ReasoningParseFailure,
    #[error("strategy `{0}` needs a retriever")]
    MissingRetriever(Strategy),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

impl PipelineError {
    /// Errors that make further notes pointless (provider down, bad key).
    pub fn is_fatal(&self) -> bool {
        match self {
            PipelineError::Llm(e) => e.is_fatal(),
            PipelineError::Retrieval(RetrievalError::Embed(e)) => {
                matches!(e, EmbedError::ProviderUnavailable(_) | EmbedError::AuthFailure(_))
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub note_id: String,
    pub task: Task,
    pub strategy: Strategy,
    pub items: Vec<String>,
    pub reasoning_text: String,
    pub retrieval_trace: Vec<RetrievalResult>,
    pub llm_calls: usize,
    /// Fewer than ten distinct items were recovered.
    pub degraded: bool,
    /// The reasoning pass yielded no terms; retrieval used the raw note.
    #[serde(default)]
    pub retrieval_degraded: bool,
}

/// A note the pipeline could not produce a prediction for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub note_id: String,
    pub task: Task,
    pub strategy: Strategy,
    pub error: String,
    #[serde(default)]
    pub reasoning: String,
}

impl FailureRecord {
    pub fn new(note_id: &str, task: Task, strategy: Strategy, err: &PipelineError) -> Self {
        let reasoning = match err {
            PipelineError::ParseFailure { reasoning } => reasoning.clone(),
            _ => String::new(),
        };
        FailureRecord {
            note_id: note_id.to_string(),
            task,
            strategy,
            error: err.to_string(),
            reasoning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool_version: String,
    pub config: serde_json::Value,
}

/// One line of a predictions file: a header first, then one record per note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RunRecord {
    Header(RunHeader),
    Prediction(Prediction),
    Failure(FailureRecord),
}

impl RunRecord {
    pub fn note_id(&self) -> Option<&str> {
        match self {
            RunRecord::Header(_) => None,
            RunRecord::Prediction(p) => Some(&p.note_id),
            RunRecord::Failure(f) => Some(&f.note_id),
        }
    }
}

/// Per-call settings shared by every strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub window: usize,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            window: DEFAULT_WINDOW,
            model_id: String::new(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

// ---------------------------------------------------------------------------
// output parsing

fn strict_entry_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d{1,2})\.\s*'([^'\n]+)'\s*$").unwrap())
}

fn lenient_entry_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?m)^[ \t>*\-]*\(?\d{1,2}\s*[.):]\s*\**\s*['"‘’“”`]([^'"‘’“”`\n]+)['"‘’“”`]"#).unwrap()
    })
}

fn clean_item(raw: &str) -> Option<String> {
    let s = raw.trim().trim_matches('*').trim();
    (!s.is_empty()).then(|| s.to_string())
}

fn dedupe(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items
        .into_iter()
        .filter(|s| seen.insert(s.to_uppercase()))
        .take(LIST_LENGTH)
        .collect()
}

fn strict_list(after_marker: &str) -> Option<Vec<String>> {
    let mut lines = after_marker.lines().filter(|l| !l.trim().is_empty());
    let mut items = Vec::with_capacity(LIST_LENGTH);
    for n in 1..=LIST_LENGTH {
        let caps = strict_entry_re().captures(lines.next()?)?;
        if caps[1].parse::<usize>().ok()? != n {
            return None;
        }
        items.push(clean_item(&caps[2])?);
    }
    Some(items)
}

fn lenient_list(after_marker: &str) -> Vec<String> {
    lenient_entry_re()
        .captures_iter(after_marker)
        .filter_map(|c| clean_item(&c[1]))
        .collect()
}

/// Parses the ranked list following the task's marker line.
///
/// The strict pass wants exactly ten `N. 'Name'` lines numbered 1..10 right
/// after the marker. Otherwise a lenient scan collects numbered quoted
/// entries anywhere after the marker. Items are deduplicated
/// (case-insensitively, first spelling wins) and capped at ten; the flag is
/// set when fewer than ten remain.
pub fn parse_prediction_list(text: &str, task: Task) -> Result<(Vec<String>, bool), PipelineError> {
    let marker = task.list_marker();
    let starts: Vec<usize> = text.match_indices(marker).map(|(i, _)| i + marker.len()).collect();
    // the last marker is the final answer; earlier ones may be echoes
    for &start in starts.iter().rev() {
        let tail = &text[start..];
        let raw = strict_list(tail).unwrap_or_else(|| lenient_list(tail));
        if raw.is_empty() {
            continue;
        }
        let items = dedupe(raw);
        let degraded = items.len() < LIST_LENGTH;
        return Ok((items, degraded));
    }
    Err(PipelineError::ParseFailure {
        reasoning: reasoning_section(text, task).to_string(),
    })
}

/// Text before the final list marker (or the whole text without one).
pub fn reasoning_section(text: &str, task: Task) -> &str {
    match text.rfind(task.list_marker()) {
        Some(i) => text[..i].trim(),
        None => text.trim(),
    }
}

/// Parsed five-step reasoning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CotReasoning {
    pub step_texts: [String; 5],
    /// Organ system (or `Unclassified`) to the terms listed under it in Step 1.
    pub extracted_terms: BTreeMap<String, Vec<String>>,
}

fn step_heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?mi)^[ \t#>*\-]*step[ \t]*([1-5])[ \t]*\**[ \t]*[:.)\-]?").unwrap())
}

impl CotReasoning {
    pub fn step(&self, n: usize) -> &str {
        &self.step_texts[n - 1]
    }

    pub fn has_terms(&self) -> bool {
        self.extracted_terms.values().any(|v| !v.is_empty())
    }
}

/// Splits model output into `Step 1:` .. `Step 5:` sections and pulls
/// `System: term, term` lines out of Step 1. Headings must appear in
/// increasing order; a heading that goes backwards is treated as text.
/// Fails only when Step 1 yields no terms.
pub fn parse_cot_reasoning(text: &str, task: Task) -> Result<CotReasoning, PipelineError> {
    let body = reasoning_section(text, task);
    let mut heads: Vec<(usize, usize, usize)> = Vec::new();
    let mut last = 0;
    for c in step_heading_re().captures_iter(body) {
        let n: usize = c[1].parse().expect("regex digit");
        if n > last {
            let m = c.get(0).expect("whole match");
            heads.push((n, m.start(), m.end()));
            last = n;
        }
    }
    let mut r = CotReasoning::default();
    for (i, &(n, _, end)) in heads.iter().enumerate() {
        let stop = heads.get(i + 1).map_or(body.len(), |h| h.1);
        r.step_texts[n - 1] = body[end..stop].trim().to_string();
    }
    r.extracted_terms = classify_terms(&r.step_texts[0]);
    if !r.has_terms() {
        return Err(PipelineError::ReasoningParseFailure);
    }
    Ok(r)
}

fn classify_terms(step1: &str) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for line in step1.lines() {
        let line = line.trim().trim_start_matches(['-', '*', '•', '+', ' ', '\t']);
        let Some((head, rest)) = line.split_once(':') else { continue };
        let head = head.trim().trim_matches('*').trim();
        if head.is_empty() {
            continue;
        }
        let system = match organ_system_position(head) {
            Some(i) => ORGAN_SYSTEMS[i].to_string(),
            None => UNCLASSIFIED.to_string(),
        };
        let terms: Vec<String> = rest
            .split([',', ';'])
            .map(|t| t.trim().trim_matches(['*', '.', '[', ']']).trim())
            .filter(|t| !t.is_empty() && !t.eq_ignore_ascii_case("none"))
            .map(str::to_string)
            .collect();
        if terms.is_empty() {
            continue;
        }
        let slot = out.entry(system).or_default();
        for t in terms {
            if !slot.contains(&t) {
                slot.push(t);
            }
        }
    }
    out
}

/// Builds the retrieval query from Step 1 terms: `"System: term"` pairs in
/// taxonomy order, space-joined. Unclassified terms are left out. Falls back
/// to the raw note when nothing classified was extracted.
pub fn extract_rag_query(reasoning: &CotReasoning, note: &str) -> String {
    let mut parts = Vec::new();
    for system in ORGAN_SYSTEMS {
        if let Some(terms) = reasoning.extracted_terms.get(system) {
            parts.extend(terms.iter().map(|t| format!("{system}: {t}")));
        }
    }
    if parts.is_empty() {
        note.to_string()
    } else {
        parts.join(" ")
    }
}

// ---------------------------------------------------------------------------
// strategies

struct Caller<'a> {
    llm: &'a dyn ChatModel,
    note_id: &'a str,
    strategy: Strategy,
    opts: &'a RunOptions,
    calls: usize,
}

impl Caller<'_> {
    fn call(&mut self, bundle: &PromptBundle) -> Result<String, LlmError> {
        self.calls += 1;
        let req = ChatRequest {
            system: bundle.system_message.clone(),
            user: bundle.user_message.clone(),
            model_id: self.opts.model_id.clone(),
            temperature: self.opts.temperature,
            max_output_tokens: self.opts.max_output_tokens,
            request_id: request_id(self.note_id, self.strategy, self.calls),
        };
        Ok(self.llm.complete(&req)?.text)
    }
}

/// Deterministic id of the `call`-th (1-based) model call for a note.
pub fn request_id(note_id: &str, strategy: Strategy, call: usize) -> String {
    format!("{note_id}:{strategy}:{call}")
}

fn context_of(chunks: &[RetrievedChunk]) -> (Vec<ContextChunk>, Vec<RetrievalResult>) {
    (
        chunks.iter().map(ContextChunk::from).collect(),
        chunks.iter().map(|c| c.result.clone()).collect(),
    )
}

fn finish(
    note: &ClinicalNote,
    task: Task,
    strategy: Strategy,
    response: &str,
    reasoning_text: String,
    retrieval_trace: Vec<RetrievalResult>,
    llm_calls: usize,
) -> Result<Prediction, PipelineError> {
    let (items, degraded) = parse_prediction_list(response, task).map_err(|_| PipelineError::ParseFailure {
        reasoning: reasoning_text.clone(),
    })?;
    Ok(Prediction {
        note_id: note.note_id.clone(),
        task,
        strategy,
        items,
        reasoning_text,
        retrieval_trace,
        llm_calls,
        degraded,
        retrieval_degraded: false,
    })
}

fn caller<'a>(llm: &'a dyn ChatModel, note: &'a ClinicalNote, strategy: Strategy, opts: &'a RunOptions) -> Caller<'a> {
    Caller {
        llm,
        note_id: &note.note_id,
        strategy,
        opts,
        calls: 0,
    }
}

/// Base prompt, one call, no retrieval.
pub fn run_base(
    note: &ClinicalNote,
    task: Task,
    llm: &dyn ChatModel,
    opts: &RunOptions,
) -> Result<Prediction, PipelineError> {
    let bundle = assemble_base_prompt(&note.text, task, opts.window)?;
    let mut c = caller(llm, note, Strategy::Base, opts);
    let out = c.call(&bundle)?;
    finish(note, task, Strategy::Base, &out, String::new(), Vec::new(), c.calls)
}

/// Chain-of-thought prompt, one call.
pub fn run_cot(
    note: &ClinicalNote,
    task: Task,
    llm: &dyn ChatModel,
    opts: &RunOptions,
) -> Result<Prediction, PipelineError> {
    let bundle = assemble_cot_prompt(&note.text, task, opts.window)?;
    let mut c = caller(llm, note, Strategy::Cot, opts);
    let out = c.call(&bundle)?;
    let reasoning = reasoning_section(&out, task).to_string();
    finish(note, task, Strategy::Cot, &out, reasoning, Vec::new(), c.calls)
}

/// Retrieve with the raw note, inject into the base prompt, one call.
pub fn run_rag(
    note: &ClinicalNote,
    task: Task,
    llm: &dyn ChatModel,
    retriever: &dyn ContextRetriever,
    opts: &RunOptions,
) -> Result<Prediction, PipelineError> {
    let bundle = assemble_base_prompt(&note.text, task, opts.window)?;
    let (ctx, trace) = context_of(&retriever.retrieve(&note.text)?);
    let bundle = inject_context(&bundle, &ctx, opts.window)?;
    let mut c = caller(llm, note, Strategy::Rag, opts);
    let out = c.call(&bundle)?;
    finish(note, task, Strategy::Rag, &out, String::new(), trace, c.calls)
}

/// Retrieve with the raw note, then one chain-of-thought call with context.
pub fn run_rag_driven_cot(
    note: &ClinicalNote,
    task: Task,
    llm: &dyn ChatModel,
    retriever: &dyn ContextRetriever,
    opts: &RunOptions,
) -> Result<Prediction, PipelineError> {
    let bundle = assemble_cot_prompt(&note.text, task, opts.window)?;
    let (ctx, trace) = context_of(&retriever.retrieve(&note.text)?);
    let bundle = inject_context(&bundle, &ctx, opts.window)?;
    let mut c = caller(llm, note, Strategy::RagCot, opts);
    let out = c.call(&bundle)?;
    let reasoning = reasoning_section(&out, task).to_string();
    finish(note, task, Strategy::RagCot, &out, reasoning, trace, c.calls)
}

/// Reasoning pass, retrieval with the Step 1 terms, then a finalize pass
/// carrying the reasoning and the context.
pub fn run_cot_driven_rag(
    note: &ClinicalNote,
    task: Task,
    llm: &dyn ChatModel,
    retriever: &dyn ContextRetriever,
    opts: &RunOptions,
) -> Result<Prediction, PipelineError> {
    let first = assemble_cot_prompt(&note.text, task, opts.window)?;
    let mut c = caller(llm, note, Strategy::CotRag, opts);
    let out1 = c.call(&first)?;
    let reasoning1 = reasoning_section(&out1, task).to_string();

    let (query, retrieval_degraded) = match parse_cot_reasoning(&out1, task) {
        Ok(r) => (extract_rag_query(&r, &note.text), false),
        Err(_) => (note.text.clone(), true),
    };
    let (ctx, trace) = context_of(&retriever.retrieve(&query)?);

    let second = assemble_finalize_prompt(&note.text, task, &reasoning1, opts.window)?;
    let second = inject_context(&second, &ctx, opts.window)?;
    let out2 = c.call(&second)?;
    let reasoning2 = reasoning_section(&out2, task);
    let reasoning = if reasoning2.is_empty() {
        reasoning1
    } else {
        format!("{reasoning1}\n\n{reasoning2}")
    };
    let mut p = finish(note, task, Strategy::CotRag, &out2, reasoning, trace, c.calls)?;
    p.retrieval_degraded = retrieval_degraded;
    Ok(p)
}

/// Dispatches on `strategy`. Retrieval strategies need `retriever`.
pub fn run_strategy(
    strategy: Strategy,
    note: &ClinicalNote,
    task: Task,
    llm: &dyn ChatModel,
    retriever: Option<&dyn ContextRetriever>,
    opts: &RunOptions,
) -> Result<Prediction, PipelineError> {
    let need = || retriever.ok_or(PipelineError::MissingRetriever(strategy));
    match strategy {
        Strategy::Base => run_base(note, task, llm, opts),
        Strategy::Cot => run_cot(note, task, llm, opts),
        Strategy::Rag => run_rag(note, task, llm, need()?, opts),
        Strategy::RagCot => run_rag_driven_cot(note, task, llm, need()?, opts),
        Strategy::CotRag => run_cot_driven_rag(note, task, llm, need()?, opts),
    }
}
