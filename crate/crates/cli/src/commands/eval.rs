use std::collections::BTreeMap;
use std::path::Path;

use phenorag_core::evalharness::{
    emit_report, evaluate, load_dataset, load_synonyms, AccuracyReport, Matcher, ReportFormat,
};
use phenorag_core::pipeline::RunRecord;
use phenorag_core::{MatchConfig, RunConfig, TOOL_VERSION};
use serde_json::{json, Value};

use super::{embedder, emit};
use crate::args::{EvalArgs, Format};
use crate::error::{at, CliError, CliResult};

fn read_predictions(path: &Path) -> CliResult<Vec<RunRecord>> {
    let content = std::fs::read_to_string(path).map_err(|e| CliError::Eval(at(path, e)))?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Eval(at(path, format!("line {}: {e}", i + 1))))
        })
        .collect()
}

pub fn eval(a: &EvalArgs, cfg: &RunConfig) -> CliResult {
    let notes = load_dataset(&a.dataset).map_err(|e| CliError::Eval(at(&a.dataset, e)))?;
    let records = read_predictions(&a.predictions)?;
    let run_config = records.iter().find_map(|r| match r {
        RunRecord::Header(h) => Some(h.config.clone()),
        _ => None,
    });

    let mut mc = MatchConfig {
        semantic_threshold: cfg.semantic_threshold,
        use_embeddings_for_disease: a.embed_match,
        ..MatchConfig::default()
    };
    if let Some(p) = &a.synonyms {
        mc.disease_synonyms = load_synonyms(p).map_err(|e| CliError::Eval(at(p, e)))?;
    }
    let embed = if a.embed_match { Some(embedder(&a.embed, cfg)?) } else { None };
    let matcher = Matcher::new(mc.clone(), embed.as_deref()).map_err(|e| CliError::Eval(e.to_string()))?;
    let scored = evaluate(&notes, &records, &matcher).map_err(|e| CliError::Eval(e.to_string()))?;

    let mut meta: BTreeMap<String, Value> = BTreeMap::new();
    meta.insert("tool_version".into(), json!(TOOL_VERSION));
    meta.insert("config".into(), json!(cfg));
    meta.insert(
        "match".into(),
        json!({
            "gene_normalization": mc.gene_normalization,
            "semantic_threshold": mc.semantic_threshold,
            "use_embeddings_for_disease": mc.use_embeddings_for_disease,
            "synonym_entries": mc.disease_synonyms.len(),
        }),
    );
    if let Some(rc) = run_config {
        meta.insert("run_config".into(), rc);
    }
    let report = AccuracyReport::from_records(&scored, meta).map_err(|e| CliError::Eval(e.to_string()))?;

    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Eval(at(dir, e)))?;
        for (name, fmt) in [
            ("report.json", ReportFormat::Json),
            ("report.csv", ReportFormat::Csv),
            ("report.txt", ReportFormat::Table),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, emit_report(&report, fmt)).map_err(|e| CliError::Eval(at(&path, e)))?;
        }
    }
    let fmt = match a.format {
        Format::Table => ReportFormat::Table,
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
    };
    emit(&emit_report(&report, fmt))
}
