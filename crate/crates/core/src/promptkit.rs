//! Prompt assembly for every (strategy, task) pair.
//!
//! Templates live in `prompts/*.txt` and are compiled in. Each file has a
//! `[system]` and a `[user]` section; lines starting with `%%` are comments.
//! Placeholders are `{{clinical_note}}`, `{{context}}` and `{{reasoning}}`
//! (plus the case fields of `note_synthesis.txt`). Substitution is a single
//! pass over the template, so placeholder-like text inside a note is never
//! expanded.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Source;
use crate::model::{Strategy, Task};
use crate::retrieval::RetrievedChunk;
use crate::tokenize::{Tokenizer, WordPunctTokenizer};

pub const DEFAULT_WINDOW: usize = 2048;
/// Window for long, noisy in-house style notes.
pub const LONG_NOTE_WINDOW: usize = 5120;
pub const LIST_LENGTH: usize = 10;

pub const CONTEXT_OPEN: &str = "REFERENCE CONTEXT:";
pub const CONTEXT_CLOSE: &str = "END CONTEXT";

/// Organ-system categories used to classify extracted phenotype terms,
/// in prompt order.
pub const ORGAN_SYSTEMS: [&str; 23] = [
    "Genitourinary system",
    "Cellular phenotype",
    "Blood and blood-forming tissues",
    "Head and neck",
    "Limbs",
    "Metabolism/homeostasis",
    "Prenatal development or birth",
    "Breast",
    "Cardiovascular system",
    "Digestive system",
    "Ear",
    "Endocrine system",
    "Eye",
    "Immune system",
    "Integument",
    "Musculoskeletal system",
    "Nervous system",
    "Respiratory system",
    "Thoracic cavity",
    "Voice",
    "Constitutional symptoms",
    "Growth abnormality",
    "Neoplasm",
];

pub const UNCLASSIFIED: &str = "Unclassified";

/// Position of a category in [`ORGAN_SYSTEMS`], matched case-insensitively.
pub fn organ_system_position(name: &str) -> Option<usize> {
    let name = name.trim();
    ORGAN_SYSTEMS.iter().position(|s| s.eq_ignore_ascii_case(name))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("clinical note is empty")]
    EmptyNote,
    #[error("prompt needs {needed} tokens but the window is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("template `{0}` is malformed")]
    BadTemplate(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Single,
    CotFirstPass,
    FinalWithContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateKind {
    Base,
    Cot,
    CotFinalize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub system: String,
    pub user: String,
}

const RAW_TEMPLATES: [(&str, &str); 7] = [
    ("base_gene", include_str!("../prompts/base_gene.txt")),
    ("base_disease", include_str!("../prompts/base_disease.txt")),
    ("cot_gene", include_str!("../prompts/cot_gene.txt")),
    ("cot_disease", include_str!("../prompts/cot_disease.txt")),
    ("cot_finalize_gene", include_str!("../prompts/cot_finalize_gene.txt")),
    ("cot_finalize_disease", include_str!("../prompts/cot_finalize_disease.txt")),
    ("note_synthesis", include_str!("../prompts/note_synthesis.txt")),
];

/// Parses the `[system]` / `[user]` template layout.
pub fn parse_template(name: &'static str, raw: &str) -> Result<PromptTemplate, PromptError> {
    let mut system: Option<Vec<&str>> = None;
    let mut user: Option<Vec<&str>> = None;
    let mut current: Option<&mut Vec<&str>> = None;
    for line in raw.lines() {
        if line.starts_with("%%") {
            continue;
        }
        match line {
            "[system]" => {
                if system.is_some() {
                    return Err(PromptError::BadTemplate(name));
                }
                current = Some(system.insert(Vec::new()));
            }
            "[user]" => {
                if user.is_some() {
                    return Err(PromptError::BadTemplate(name));
                }
                current = Some(user.insert(Vec::new()));
            }
            _ => match current.as_mut() {
                Some(buf) => buf.push(line),
                None if line.trim().is_empty() => {}
                None => return Err(PromptError::BadTemplate(name)),
            },
        }
    }
    let user = user.ok_or(PromptError::BadTemplate(name))?;
    Ok(PromptTemplate {
        name,
        system: system.unwrap_or_default().join("\n"),
        user: user.join("\n"),
    })
}

fn templates() -> &'static HashMap<&'static str, PromptTemplate> {
    static T: OnceLock<HashMap<&'static str, PromptTemplate>> = OnceLock::new();
    T.get_or_init(|| {
        RAW_TEMPLATES
            .iter()
            .map(|(name, raw)| {
                let t = parse_template(name, raw).expect("built-in template parses");
                (*name, t)
            })
            .collect()
    })
}

pub fn template(kind: TemplateKind, task: Task) -> &'static PromptTemplate {
    let name = match (kind, task) {
        (TemplateKind::Base, Task::Gene) => "base_gene",
        (TemplateKind::Base, Task::Disease) => "base_disease",
        (TemplateKind::Cot, Task::Gene) => "cot_gene",
        (TemplateKind::Cot, Task::Disease) => "cot_disease",
        (TemplateKind::CotFinalize, Task::Gene) => "cot_finalize_gene",
        (TemplateKind::CotFinalize, Task::Disease) => "cot_finalize_disease",
    };
    &templates()[name]
}

pub fn note_synthesis_template() -> &'static PromptTemplate {
    &templates()["note_synthesis"]
}

/// Single-pass `{{name}}` substitution. Unknown placeholders are left as is.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = &after[..close];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// A context passage as it appears in the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextChunk {
    pub text: String,
    pub provenance: String,
}

impl From<&RetrievedChunk> for ContextChunk {
    fn from(r: &RetrievedChunk) -> Self {
        let source = match r.source {
            Source::HpoRecord => "HPO",
            Source::OmimText => "OMIM",
        };
        ContextChunk {
            text: r.text.clone(),
            provenance: format!("source={source} doc={} chunk={}", r.doc_id, r.result.chunk_id),
        }
    }
}

/// Renders the delimited context block. Empty input renders nothing.
pub fn render_context_block(chunks: &[ContextChunk]) -> String {
    if chunks.is_empty() {
        return String::new();
    }
    let mut s = format!("{CONTEXT_OPEN}\n");
    for (i, c) in chunks.iter().enumerate() {
        s.push_str(&format!("[{}] {}\n{}\n", i + 1, c.provenance, c.text.trim_end()));
    }
    s.push_str(CONTEXT_CLOSE);
    s.push('\n');
    s
}

/// Fully rendered prompt plus what is needed to re-render it with context.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system_message: String,
    pub user_message: String,
    pub token_budget: usize,
    pub strategy: Strategy,
    pub task: Task,
    pub stage: Stage,
    /// Context passages actually included, in rank order.
    pub context: Vec<ContextChunk>,
    /// Passages dropped to fit the budget.
    pub dropped_context: usize,
    kind: TemplateKind,
    note: String,
    reasoning: Option<String>,
}

impl PromptBundle {
    pub fn note(&self) -> &str {
        &self.note
    }

    pub fn template_kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn token_count(&self) -> usize {
        count_tokens(&self.system_message, &self.user_message)
    }
}

fn count_tokens(system: &str, user: &str) -> usize {
    WordPunctTokenizer.count(system) + WordPunctTokenizer.count(user)
}

fn render_bundle(
    kind: TemplateKind,
    task: Task,
    note: &str,
    context: &[ContextChunk],
    reasoning: Option<&str>,
) -> (String, String) {
    let t = template(kind, task);
    let ctx = render_context_block(context);
    let vars = [
        ("clinical_note", note),
        ("context", ctx.as_str()),
        ("reasoning", reasoning.unwrap_or("")),
    ];
    (render(&t.system, &vars), render(&t.user, &vars))
}

fn build(
    kind: TemplateKind,
    task: Task,
    note: &str,
    reasoning: Option<String>,
    window: usize,
    strategy: Strategy,
    stage: Stage,
) -> Result<PromptBundle, PromptError> {
    if note.trim().is_empty() {
        return Err(PromptError::EmptyNote);
    }
    let (system, user) = render_bundle(kind, task, note, &[], reasoning.as_deref());
    let needed = count_tokens(&system, &user);
    if needed > window {
        return Err(PromptError::BudgetExceeded {
            needed,
            budget: window,
        });
    }
    Ok(PromptBundle {
        system_message: system,
        user_message: user,
        token_budget: window,
        strategy,
        task,
        stage,
        context: Vec::new(),
        dropped_context: 0,
        kind,
        note: note.to_string(),
        reasoning,
    })
}

/// Base prompt: a single user message asking for exactly ten candidates.
pub fn assemble_base_prompt(note: &str, task: Task, window: usize) -> Result<PromptBundle, PromptError> {
    build(TemplateKind::Base, task, note, None, window, Strategy::Base, Stage::Single)
}

/// Five-step chain-of-thought prompt (system + user).
pub fn assemble_cot_prompt(note: &str, task: Task, window: usize) -> Result<PromptBundle, PromptError> {
    build(TemplateKind::Cot, task, note, None, window, Strategy::Cot, Stage::Single)
}

/// Second call of the reasoning-first hybrid: carries the first-pass
/// reasoning verbatim. Context is added with [`inject_context`].
pub fn assemble_finalize_prompt(
    note: &str,
    task: Task,
    reasoning: &str,
    window: usize,
) -> Result<PromptBundle, PromptError> {
    build(
        TemplateKind::CotFinalize,
        task,
        note,
        Some(reasoning.to_string()),
        window,
        Strategy::CotRag,
        Stage::FinalWithContext,
    )
}

/// Inserts the context block ahead of the note, dropping whole passages
/// from the lowest-ranked upward until the prompt fits `window`. The note is
/// never truncated.
pub fn inject_context(
    bundle: &PromptBundle,
    context: &[ContextChunk],
    window: usize,
) -> Result<PromptBundle, PromptError> {
    for keep in (0..=context.len()).rev() {
        let (system, user) = render_bundle(
            bundle.kind,
            bundle.task,
            &bundle.note,
            &context[..keep],
            bundle.reasoning.as_deref(),
        );
        let needed = count_tokens(&system, &user);
        if needed <= window {
            let strategy = match bundle.kind {
                TemplateKind::Base => Strategy::Rag,
                TemplateKind::Cot => Strategy::RagCot,
                TemplateKind::CotFinalize => Strategy::CotRag,
            };
            return Ok(PromptBundle {
                system_message: system,
                user_message: user,
                token_budget: window,
                strategy,
                stage: Stage::FinalWithContext,
                context: context[..keep].to_vec(),
                dropped_context: context.len() - keep,
                ..bundle.clone()
            });
        }
        if keep == 0 {
            return Err(PromptError::BudgetExceeded {
                needed,
                budget: window,
            });
        }
    }
    unreachable!("loop returns at keep == 0")
}

/// Structured case fields for synthetic note generation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub sex: Option<String>,
    pub age: Option<String>,
    pub observed_phenotypes: Vec<String>,
    pub excluded_phenotypes: Vec<String>,
}

/// Assembles the note-generation prompt (system, user) for a structured case.
pub fn assemble_note_synthesis_prompt(case: &CaseSummary) -> (String, String) {
    let t = note_synthesis_template();
    let list = |v: &[String]| if v.is_empty() { "none".to_string() } else { v.join("; ") };
    let observed = list(&case.observed_phenotypes);
    let excluded = list(&case.excluded_phenotypes);
    let vars = [
        ("sex", case.sex.as_deref().unwrap_or("unknown")),
        ("age", case.age.as_deref().unwrap_or("unknown")),
        ("observed_phenotypes", observed.as_str()),
        ("excluded_phenotypes", excluded.as_str()),
    ];
    (render(&t.system, &vars), render(&t.user, &vars))
}
