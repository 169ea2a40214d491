//! Dataset loading, truth matching, Top-k accuracy and reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::DEFAULT_SEMANTIC_THRESHOLD;
use crate::embedding::{EmbedError, Embedder};
use crate::model::{ClinicalNote, Dataset, Strategy, Task};
use crate::pipeline::RunRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("record {index}: {reason}")]
    SchemaError { index: usize, reason: String },
    #[error("no records to evaluate")]
    EmptyRecords,
    #[error("prediction for unknown note `{0}`")]
    IdMismatch(String),
    #[error("note `{note_id}` has no {task} truth label")]
    MissingTruth { note_id: String, task: Task },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// datasets

#[derive(Deserialize)]
struct NoteRecord {
    note_id: String,
    text: String,
    #[serde(default)]
    dataset: Option<String>,
    #[serde(default)]
    truth_gene: Option<String>,
    #[serde(default)]
    truth_disease: Option<String>,
    #[serde(default)]
    demographics: Option<String>,
}

/// Parses JSONL notes for evaluation: every record needs a truth label.
/// `index` in errors is the 0-based record index (blank lines are not
/// records).
pub fn parse_dataset(content: &str) -> Result<Vec<ClinicalNote>, EvalError> {
    parse_notes(content, true)
}

/// Like [`parse_dataset`], with truth labels optional unless `require_truth`.
pub fn parse_notes(content: &str, require_truth: bool) -> Result<Vec<ClinicalNote>, EvalError> {
    let mut notes = Vec::new();
    let mut seen = HashMap::new();
    for (index, line) in content.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let schema = |reason: String| EvalError::SchemaError { index, reason };
        let r: NoteRecord = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        let blank = |s: &Option<String>| s.as_deref().is_none_or(|v| v.trim().is_empty());
        if r.note_id.trim().is_empty() {
            return Err(schema("empty note_id".into()));
        }
        if r.text.trim().is_empty() {
            return Err(schema("empty text".into()));
        }
        if require_truth && blank(&r.truth_gene) && blank(&r.truth_disease) {
            return Err(schema("needs truth_gene or truth_disease".into()));
        }
        if let Some(prev) = seen.insert(r.note_id.clone(), index) {
            return Err(schema(format!("note_id `{}` already used by record {prev}", r.note_id)));
        }
        notes.push(ClinicalNote {
            note_id: r.note_id,
            text: r.text,
            dataset: r.dataset.as_deref().map_or(Dataset::Custom, Dataset::parse_lenient),
            truth_gene: r.truth_gene.filter(|s| !s.trim().is_empty()),
            truth_disease: r.truth_disease.filter(|s| !s.trim().is_empty()),
            demographics: r.demographics,
        });
    }
    Ok(notes)
}

pub fn load_dataset(path: &Path) -> Result<Vec<ClinicalNote>, EvalError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

fn label_key(task: Task, label: &str) -> String {
    match task {
        Task::Gene => normalize_gene(label),
        Task::Disease => normalize_disease(label),
    }
}

/// Keeps at most `max_per_label` notes per truth label, chosen with a
/// seeded shuffle. Unlabeled notes are dropped; input order is preserved.
pub fn cap_per_label(notes: &[ClinicalNote], task: Task, max_per_label: usize, seed: u64) -> Vec<ClinicalNote> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, n) in notes.iter().enumerate() {
        if let Some(label) = n.truth_for(task) {
            groups.entry(label_key(task, label)).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = Vec::new();
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        keep.extend(idx.into_iter().take(max_per_label));
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| notes[i].clone()).collect()
}

// ---------------------------------------------------------------------------
// matching

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GeneNormalization {
    #[default]
    UppercaseTrim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub gene_normalization: GeneNormalization,
    /// Canonical disease name to its synonyms.
    pub disease_synonyms: BTreeMap<String, Vec<String>>,
    /// Gene alias to approved symbol. Empty by default.
    #[serde(default)]
    pub gene_aliases: BTreeMap<String, String>,
    pub semantic_threshold: f64,
    pub use_embeddings_for_disease: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            gene_normalization: GeneNormalization::UppercaseTrim,
            disease_synonyms: BTreeMap::new(),
            gene_aliases: BTreeMap::new(),
            semantic_threshold: DEFAULT_SEMANTIC_THRESHOLD,
            use_embeddings_for_disease: false,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.semantic_threshold > 0.0 && self.semantic_threshold <= 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "semantic_threshold {} is outside (0, 1]",
                self.semantic_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct SynonymRecord {
    canonical: String,
    synonyms: Vec<String>,
}

/// Reads a JSONL synonym table of `{"canonical": .., "synonyms": [..]}`.
pub fn parse_synonyms(content: &str) -> Result<BTreeMap<String, Vec<String>>, EvalError> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (index, line) in content.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let r: SynonymRecord = serde_json::from_str(line).map_err(|e| EvalError::SchemaError {
            index,
            reason: e.to_string(),
        })?;
        out.entry(r.canonical).or_default().extend(r.synonyms);
    }
    Ok(out)
}

pub fn load_synonyms(path: &Path) -> Result<BTreeMap<String, Vec<String>>, EvalError> {
    parse_synonyms(&std::fs::read_to_string(path)?)
}

const QUOTES: &[char] = &['\'', '"', '‘', '’', '“', '”', '`'];

pub fn normalize_gene(s: &str) -> String {
    s.trim().trim_matches(QUOTES).trim().to_uppercase()
}

pub fn normalize_disease(s: &str) -> String {
    s.trim()
        .trim_matches(QUOTES)
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// True iff the normalized symbols are equal.
pub fn match_gene(predicted: &str, truth: &str) -> bool {
    let p = normalize_gene(predicted);
    !p.is_empty() && p == normalize_gene(truth)
}

/// Truth matcher for both tasks. Build once per evaluation.
pub struct Matcher<'a> {
    cfg: MatchConfig,
    canonical: HashMap<String, String>,
    aliases: HashMap<String, String>,
    embedder: Option<&'a dyn Embedder<f64>>,
}

impl<'a> Matcher<'a> {
    pub fn new(cfg: MatchConfig, embedder: Option<&'a dyn Embedder<f64>>) -> Result<Self, EvalError> {
        cfg.validate()?;
        if cfg.use_embeddings_for_disease && embedder.is_none() {
            return Err(EvalError::InvalidConfig(
                "embedding-based disease matching needs an embedder".into(),
            ));
        }
        let mut canonical = HashMap::new();
        for (canon, syns) in &cfg.disease_synonyms {
            let c = normalize_disease(canon);
            for name in std::iter::once(canon).chain(syns) {
                let n = normalize_disease(name);
                if let Some(prev) = canonical.insert(n.clone(), c.clone()) {
                    if prev != c {
                        return Err(EvalError::InvalidConfig(format!(
                            "`{name}` is listed under two canonical names"
                        )));
                    }
                }
            }
        }
        let aliases = cfg
            .gene_aliases
            .iter()
            .map(|(a, s)| (normalize_gene(a), normalize_gene(s)))
            .collect();
        Ok(Matcher {
            cfg,
            canonical,
            aliases,
            embedder,
        })
    }

    pub fn config(&self) -> &MatchConfig {
        &self.cfg
    }

    fn gene_symbol(&self, s: &str) -> String {
        let n = normalize_gene(s);
        self.aliases.get(&n).cloned().unwrap_or(n)
    }

    pub fn gene(&self, predicted: &str, truth: &str) -> bool {
        let p = self.gene_symbol(predicted);
        !p.is_empty() && p == self.gene_symbol(truth)
    }

    pub fn disease(&self, predicted: &str, truth: &str) -> Result<bool, EvalError> {
        let p = normalize_disease(predicted);
        let t = normalize_disease(truth);
        if p.is_empty() || t.is_empty() {
            return Ok(false);
        }
        if p == t {
            return Ok(true);
        }
        if let (Some(a), Some(b)) = (self.canonical.get(&p), self.canonical.get(&t)) {
            if a == b {
                return Ok(true);
            }
        }
        match (self.cfg.use_embeddings_for_disease, self.embedder) {
            (true, Some(e)) => {
                let v = e.embed_texts(&[&p, &t])?;
                Ok(v[0].cosine(&v[1]) >= self.cfg.semantic_threshold)
            }
            _ => Ok(false),
        }
    }

    pub fn matches(&self, task: Task, predicted: &str, truth: &str) -> Result<bool, EvalError> {
        match task {
            Task::Gene => Ok(self.gene(predicted, truth)),
            Task::Disease => self.disease(predicted, truth),
        }
    }
}

/// Disease match under `cfg`; see [`Matcher::disease`].
pub fn match_disease(
    predicted: &str,
    truth: &str,
    cfg: &MatchConfig,
    embedder: Option<&dyn Embedder<f64>>,
) -> Result<bool, EvalError> {
    Matcher::new(cfg.clone(), embedder)?.disease(predicted, truth)
}

/// 1-based position of the first item matching `truth`.
pub fn rank_of_truth(items: &[String], truth: &str, task: Task, matcher: &Matcher<'_>) -> Result<Option<usize>, EvalError> {
    for (i, item) in items.iter().enumerate() {
        if matcher.matches(task, item, truth)? {
            return Ok(Some(i + 1));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// scoring

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub note_id: String,
    pub dataset: Dataset,
    pub strategy: Strategy,
    pub task: Task,
    pub rank_of_truth: Option<usize>,
    pub top1_hit: bool,
    pub top10_hit: bool,
    pub degraded: bool,
    pub parse_failure: bool,
}

impl EvalRecord {
    pub fn scored(
        note_id: impl Into<String>,
        dataset: Dataset,
        strategy: Strategy,
        task: Task,
        rank: Option<usize>,
        degraded: bool,
    ) -> Self {
        EvalRecord {
            note_id: note_id.into(),
            dataset,
            strategy,
            task,
            rank_of_truth: rank,
            top1_hit: rank == Some(1),
            top10_hit: rank.is_some_and(|r| r <= 10),
            degraded,
            parse_failure: false,
        }
    }

    /// A case with no usable prediction; scores as a miss.
    pub fn failed(note_id: impl Into<String>, dataset: Dataset, strategy: Strategy, task: Task) -> Self {
        EvalRecord {
            parse_failure: true,
            ..EvalRecord::scored(note_id, dataset, strategy, task, None, false)
        }
    }

    pub fn hit_at(&self, k: usize) -> bool {
        self.rank_of_truth.is_some_and(|r| r <= k)
    }
}

/// Scores every prediction and failure record against the notes' truth.
pub fn evaluate(notes: &[ClinicalNote], records: &[RunRecord], matcher: &Matcher<'_>) -> Result<Vec<EvalRecord>, EvalError> {
    let by_id: HashMap<&str, &ClinicalNote> = notes.iter().map(|n| (n.note_id.as_str(), n)).collect();
    let mut out = Vec::new();
    for r in records {
        let (note_id, task) = match r {
            RunRecord::Header(_) => continue,
            RunRecord::Prediction(p) => (&p.note_id, p.task),
            RunRecord::Failure(f) => (&f.note_id, f.task),
        };
        let note = by_id
            .get(note_id.as_str())
            .ok_or_else(|| EvalError::IdMismatch(note_id.clone()))?;
        let truth = note.truth_for(task).ok_or_else(|| EvalError::MissingTruth {
            note_id: note_id.clone(),
            task,
        })?;
        out.push(match r {
            RunRecord::Prediction(p) => {
                let rank = rank_of_truth(&p.items, truth, task, matcher)?;
                EvalRecord::scored(&p.note_id, note.dataset, p.strategy, task, rank, p.degraded)
            }
            RunRecord::Failure(f) => EvalRecord::failed(&f.note_id, note.dataset, f.strategy, task),
            RunRecord::Header(_) => unreachable!(),
        });
    }
    if out.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    Ok(out)
}

/// Fraction of records whose truth rank is at most `k`.
pub fn topk_accuracy(records: &[EvalRecord], k: usize) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let hits = records.iter().filter(|r| r.hit_at(k)).count();
    Ok(hits as f64 / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub dataset: Dataset,
    pub task: Task,
    pub strategy: Strategy,
    pub n_cases: usize,
    pub top1_hits: usize,
    pub top10_hits: usize,
    pub top1_fraction: f64,
    pub top10_fraction: f64,
    pub parse_failures: usize,
    pub degraded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Run metadata (tool version, match settings).
    pub meta: BTreeMap<String, serde_json::Value>,
    /// Ordered by dataset, task, strategy.
    pub groups: Vec<GroupSummary>,
}

impl AccuracyReport {
    /// Groups records; the result does not depend on record order.
    pub fn from_records(records: &[EvalRecord], meta: BTreeMap<String, serde_json::Value>) -> Result<Self, EvalError> {
        if records.is_empty() {
            return Err(EvalError::EmptyRecords);
        }
        let mut groups: BTreeMap<(Dataset, Task, Strategy), Vec<&EvalRecord>> = BTreeMap::new();
        for r in records {
            groups.entry((r.dataset, r.task, r.strategy)).or_default().push(r);
        }
        let groups = groups
            .into_iter()
            .map(|((dataset, task, strategy), rs)| {
                let n = rs.len();
                let top1 = rs.iter().filter(|r| r.hit_at(1)).count();
                let top10 = rs.iter().filter(|r| r.hit_at(10)).count();
                GroupSummary {
                    dataset,
                    task,
                    strategy,
                    n_cases: n,
                    top1_hits: top1,
                    top10_hits: top10,
                    top1_fraction: top1 as f64 / n as f64,
                    top10_fraction: top10 as f64 / n as f64,
                    parse_failures: rs.iter().filter(|r| r.parse_failure).count(),
                    degraded: rs.iter().filter(|r| r.degraded).count(),
                }
            })
            .collect();
        Ok(AccuracyReport { meta, groups })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

const COLUMNS: [&str; 8] = [
    "dataset",
    "task",
    "strategy",
    "n_cases",
    "top1",
    "top10",
    "parse_failures",
    "degraded",
];

pub fn emit_report(report: &AccuracyReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from(
                "dataset,task,strategy,n_cases,top1_hits,top10_hits,top1_fraction,top10_fraction,parse_failures,degraded\n",
            );
            for g in &report.groups {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    g.dataset,
                    g.task,
                    g.strategy,
                    g.n_cases,
                    g.top1_hits,
                    g.top10_hits,
                    g.top1_fraction,
                    g.top10_fraction,
                    g.parse_failures,
                    g.degraded
                );
            }
            s
        }
        ReportFormat::Table => {
            let rows: Vec<[String; 8]> = report
                .groups
                .iter()
                .map(|g| {
                    [
                        g.dataset.to_string(),
                        g.task.to_string(),
                        g.strategy.to_string(),
                        g.n_cases.to_string(),
                        format!("{:.2}", g.top1_fraction),
                        format!("{:.2}", g.top10_fraction),
                        g.parse_failures.to_string(),
                        g.degraded.to_string(),
                    ]
                })
                .collect();
            let mut widths = COLUMNS.map(str::len);
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut s = String::new();
            let line = |s: &mut String, cells: &[&str]| {
                let parts: Vec<String> = cells
                    .iter()
                    .zip(widths)
                    .enumerate()
                    .map(|(i, (c, w))| if i < 3 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect();
                let _ = writeln!(s, "{}", parts.join("  ").trim_end());
            };
            line(&mut s, &COLUMNS);
            for row in &rows {
                let cells: Vec<&str> = row.iter().map(String::as_str).collect();
                line(&mut s, &cells);
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MockEmbedder;

    #[test]
    fn dataset_schema() {
        let ok = r#"{"note_id":"a","text":"t","dataset":"PHENOPACKET_DERIVED","truth_gene":"ACTA1"}
{"note_id":"b","text":"t","truth_disease":"Sotos syndrome"}

{"note_id":"c","text":"t","dataset":"in-house","truth_gene":"X","truth_disease":"Y"}"#;
        let notes = parse_dataset(ok).unwrap();
        assert_eq!(notes.len(), 3);
        assert_eq!(notes[0].dataset, Dataset::PhenopacketDerived);
        assert_eq!(notes[1].dataset, Dataset::Custom);
        let bad = "{\"note_id\":\"a\",\"text\":\"t\"}";
        assert!(matches!(parse_dataset(bad), Err(EvalError::SchemaError { index: 0, .. })));
        let dup = "{\"note_id\":\"a\",\"text\":\"t\",\"truth_gene\":\"G\"}\n{\"note_id\":\"a\",\"text\":\"u\",\"truth_gene\":\"G\"}";
        assert!(matches!(parse_dataset(dup), Err(EvalError::SchemaError { index: 1, .. })));
    }

    #[test]
    fn gene_matching() {
        assert!(match_gene("'ACTA1'", "ACTA1"));
        assert!(match_gene("acta1 ", "ACTA1"));
        assert!(!match_gene("NEB", "ACTA1"));
        assert!(!match_gene("''", ""));
    }

    #[test]
    fn disease_matching_paths() {
        let mut cfg = MatchConfig::default();
        cfg.disease_synonyms.insert(
            "Heterotaxy, visceral, 1, X-linked".into(),
            vec!["X-linked heterotaxy".into()],
        );
        let m = Matcher::new(cfg.clone(), None).unwrap();
        assert!(m.disease("Sotos syndrome", "SOTOS SYNDROME").unwrap());
        assert!(m.disease("X-linked heterotaxy", "Heterotaxy, visceral, 1, X-linked").unwrap());
        assert!(m.disease("Heterotaxy, visceral, 1, X-linked", "X-linked heterotaxy").unwrap());
        assert!(!m.disease("Sotos syndrome", "Noonan syndrome").unwrap());

        cfg.use_embeddings_for_disease = true;
        assert!(Matcher::new(cfg.clone(), None).is_err());
        let e = MockEmbedder::new(1);
        let m = Matcher::new(cfg, Some(&e)).unwrap();
        assert!(!m.disease("nemaline myopathy", "polysplenia").unwrap());
        assert!(m.disease("Nemaline  Myopathy", "nemaline myopathy").unwrap());
    }

    #[test]
    fn conflicting_synonyms_rejected() {
        let mut cfg = MatchConfig::default();
        cfg.disease_synonyms.insert("A".into(), vec!["x".into()]);
        cfg.disease_synonyms.insert("B".into(), vec!["X".into()]);
        assert!(Matcher::new(cfg, None).is_err());
    }

    #[test]
    fn ranks_and_accuracy() {
        let m = Matcher::new(MatchConfig::default(), None).unwrap();
        let items: Vec<String> = ["MTM1", "BIN1", "TNNT1", "TPM2", "NEB", "ACTA1"].map(String::from).to_vec();
        assert_eq!(rank_of_truth(&items, "ACTA1", Task::Gene, &m).unwrap(), Some(6));
        assert_eq!(rank_of_truth(&items, "MTM1", Task::Gene, &m).unwrap(), Some(1));
        assert_eq!(rank_of_truth(&items, "RYR1", Task::Gene, &m).unwrap(), None);

        let recs = vec![
            EvalRecord::scored("a", Dataset::Custom, Strategy::Base, Task::Gene, Some(1), false),
            EvalRecord::failed("b", Dataset::Custom, Strategy::Base, Task::Gene),
        ];
        assert_eq!(topk_accuracy(&recs, 1).unwrap(), 0.5);
        assert_eq!(topk_accuracy(&recs, 10).unwrap(), 0.5);
        assert_eq!(topk_accuracy(&[], 1), Err(EvalError::EmptyRecords));
        assert_eq!(topk_accuracy(&recs, 0), Err(EvalError::InvalidK));
    }

    #[test]
    fn report_rows_and_formats() {
        let recs = vec![
            EvalRecord::scored("a", Dataset::Custom, Strategy::Cot, Task::Gene, Some(3), false),
            EvalRecord::scored("a", Dataset::Custom, Strategy::Base, Task::Gene, Some(1), true),
            EvalRecord::failed("b", Dataset::Custom, Strategy::Base, Task::Gene),
        ];
        let rep = AccuracyReport::from_records(&recs, BTreeMap::new()).unwrap();
        assert_eq!(rep.groups.len(), 2);
        assert_eq!(rep.groups[0].strategy, Strategy::Base);
        assert_eq!(rep.groups[0].n_cases, 2);
        assert_eq!(rep.groups[0].parse_failures, 1);
        let table = emit_report(&rep, ReportFormat::Table);
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("0.50"));
        let json = emit_report(&rep, ReportFormat::Json);
        let back: AccuracyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(emit_report(&back, ReportFormat::Json), json);
        assert_eq!(emit_report(&rep, ReportFormat::Csv).lines().count(), 3);

        let mut shuffled = recs.clone();
        shuffled.reverse();
        assert_eq!(AccuracyReport::from_records(&shuffled, BTreeMap::new()).unwrap(), rep);
    }

    #[test]
    fn capping_is_seeded() {
        let notes: Vec<ClinicalNote> = (0..9)
            .map(|i| ClinicalNote {
                truth_gene: Some(if i < 5 { "A" } else { "b" }.into()),
                ..ClinicalNote::unlabeled(format!("n{i}"), "t")
            })
            .collect();
        let a = cap_per_label(&notes, Task::Gene, 2, 42);
        assert_eq!(a.len(), 4);
        assert_eq!(a, cap_per_label(&notes, Task::Gene, 2, 42));
        let ids: Vec<_> = a.iter().map(|n| n.note_id[1..].parse::<usize>().unwrap()).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}
