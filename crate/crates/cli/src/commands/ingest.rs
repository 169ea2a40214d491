use std::path::{Path, PathBuf};

use phenorag_core::corpus::{
    check_unique_ids, chunk_document, parse_hpo_records, parse_omim_records, write_chunk_store, KnowledgeDoc,
};
use phenorag_core::RunConfig;

use super::{artifact_meta, create};
use crate::args::IngestArgs;
use crate::error::{at, CliError, CliResult};

#[derive(Clone, Copy)]
enum Kind {
    Hpo,
    Omim,
}

fn detect(path: &Path) -> Kind {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json" | "jsonl") => Kind::Hpo,
        _ => Kind::Omim,
    }
}

pub fn ingest(a: &IngestArgs, cfg: &RunConfig) -> CliResult {
    let inputs: Vec<(PathBuf, Kind)> = a
        .inputs
        .iter()
        .map(|p| (p.clone(), detect(p)))
        .chain(a.hpo.iter().map(|p| (p.clone(), Kind::Hpo)))
        .chain(a.omim.iter().map(|p| (p.clone(), Kind::Omim)))
        .collect();
    if inputs.is_empty() {
        return Err(CliError::Usage("no input files".into()));
    }

    let mut docs: Vec<KnowledgeDoc> = Vec::new();
    let mut rejects = 0;
    for (path, kind) in &inputs {
        let content = std::fs::read_to_string(path).map_err(|e| CliError::Ingest(at(path, e)))?;
        let parsed = match kind {
            Kind::Hpo => parse_hpo_records(&content),
            Kind::Omim => parse_omim_records(&content),
        };
        for r in parsed {
            match r {
                Ok(d) => docs.push(d),
                Err(rej) if a.skip_bad => {
                    eprintln!("skipped {}: {rej}", path.display());
                    rejects += 1;
                }
                Err(rej) => return Err(CliError::Ingest(at(path, rej))),
            }
        }
    }
    check_unique_ids(&docs).map_err(|e| CliError::Ingest(e.to_string()))?;
    if docs.is_empty() {
        return Err(CliError::Ingest("no documents ingested".into()));
    }

    let mut chunks = Vec::new();
    for d in &docs {
        chunks.extend(chunk_document(d, cfg.chunk_size).map_err(|e| CliError::Ingest(e.to_string()))?);
    }
    let w = create(&a.out, CliError::Ingest)?;
    write_chunk_store(w, &chunks, &artifact_meta(cfg)).map_err(|e| CliError::Ingest(at(&a.out, e)))?;
    println!(
        "ingested {} documents into {} chunks ({} rejected) -> {}",
        docs.len(),
        chunks.len(),
        rejects,
        a.out.display()
    );
    Ok(())
}
