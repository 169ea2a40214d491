use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use phenorag_core::evalharness::parse_notes;
use phenorag_core::llm::{load_script, ChatModel, RemoteChatModel, Transcript};
use phenorag_core::pipeline::{run_strategy, FailureRecord, PipelineError, RunHeader, RunRecord};
use phenorag_core::retrieval::{read_index, ContextRetriever};
use phenorag_core::{ChatClient, ClinicalNote, DenseIndex, Prediction, RunConfig, TwoStageRetriever, TOOL_VERSION};
use rayon::prelude::*;

use super::{embedder, read_store};
use crate::args::RunArgs;
use crate::error::{at, CliError, CliResult};

fn load_notes(path: &Path) -> CliResult<Vec<ClinicalNote>> {
    let content = std::fs::read_to_string(path).map_err(|e| CliError::Usage(at(path, e)))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "json") => parse_notes(&content, false).map_err(|e| CliError::Usage(at(path, e))),
        _ => {
            if content.trim().is_empty() {
                return Err(CliError::Usage(at(path, "note is empty")));
            }
            let id = path.file_stem().map_or("note".into(), |s| s.to_string_lossy().into_owned());
            Ok(vec![ClinicalNote::unlabeled(id, content)])
        }
    }
}

fn chat_client(a: &RunArgs, cfg: &RunConfig) -> CliResult<ChatClient> {
    let client = match (&a.mock_llm, cfg.remote_chat()) {
        (Some(script), _) => ChatClient::new(load_script(script).map_err(|e| CliError::Usage(e.to_string()))?),
        (None, Some(rc)) => ChatClient::new(RemoteChatModel::new(rc).map_err(|e| CliError::Provider(e.to_string()))?),
        (None, None) => {
            return Err(CliError::Usage(
                "no model provider configured: pass --mock-llm or set llm_url".into(),
            ))
        }
    };
    let mut client = client.truncate_long_responses(cfg.truncate_long_responses);
    if let Some(path) = &a.transcript {
        let t = Transcript::to_file(path).map_err(|e| CliError::Usage(at(path, e)))?;
        client = client.with_transcript(Arc::new(t));
    }
    Ok(client)
}

/// Note ids already recorded in an earlier run with the same header.
fn recorded(path: &Path, header: &RunRecord) -> CliResult<HashSet<String>> {
    let f = File::open(path).map_err(|e| CliError::Usage(at(path, e)))?;
    let mut done = HashSet::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::Usage(at(path, e)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::Usage(at(path, format!("line {}: {e}", i + 1))))?;
        if i == 0 {
            if &rec != header {
                return Err(CliError::Usage(at(
                    path,
                    "was written with a different configuration; refusing to resume",
                )));
            }
            continue;
        }
        if let Some(id) = rec.note_id() {
            done.insert(id.to_string());
        }
    }
    Ok(done)
}

fn write_record(w: &mut dyn Write, rec: &RunRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, rec)?;
    w.write_all(b"\n")
}

pub fn run(a: &RunArgs, cfg: &RunConfig) -> CliResult {
    let (strategy, task) = (cfg.strategy, cfg.task);
    if strategy.uses_retrieval() && (a.index.is_none() || a.store.is_none()) {
        return Err(CliError::Usage(format!("--strategy {strategy} needs --index and --store")));
    }

    let mut notes = load_notes(&a.notes)?;
    if let Some(n) = a.limit {
        notes.truncate(n);
    }
    let header = RunRecord::Header(RunHeader {
        tool_version: TOOL_VERSION.to_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
    });
    let resuming = a.resume && a.out.as_deref().is_some_and(Path::exists);
    let done = match (&a.out, resuming) {
        (Some(out), true) => recorded(out, &header)?,
        _ => HashSet::new(),
    };
    let todo: Vec<&ClinicalNote> = notes.iter().filter(|n| !done.contains(&n.note_id)).collect();

    let chat = chat_client(a, cfg)?;

    let chunks;
    let index: DenseIndex;
    let embed;
    let retriever = if strategy.uses_retrieval() {
        let (ipath, spath) = (a.index.as_ref().unwrap(), a.store.as_ref().unwrap());
        chunks = read_store(spath)?;
        let f = File::open(ipath).map_err(|e| CliError::Index(at(ipath, e)))?;
        index = read_index(BufReader::new(f)).map_err(|e| CliError::Index(at(ipath, e)))?;
        embed = embedder(&a.embed, cfg)?;
        index
            .verify(&chunks, embed.as_ref())
            .map_err(|e| CliError::Index(at(ipath, e)))?;
        Some(
            TwoStageRetriever::new(&index, &chunks, embed.as_ref(), cfg.retrieval_settings())
                .map_err(|e| CliError::Index(e.to_string()))?,
        )
    } else {
        None
    };

    let mut out: Box<dyn Write> = match &a.out {
        Some(p) if resuming => Box::new(BufWriter::new(
            OpenOptions::new()
                .append(true)
                .open(p)
                .map_err(|e| CliError::Usage(at(p, e)))?,
        )),
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Usage(at(p, e)))?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let io_err = |e: std::io::Error| CliError::Usage(format!("writing predictions: {e}"));
    if !resuming {
        write_record(&mut out, &header).map_err(io_err)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let opts = cfg.run_options();
    let llm: &dyn ChatModel = &chat;
    let ret = retriever.as_ref().map(|r| r as &dyn ContextRetriever);
    let (mut ok, mut failed) = (0usize, 0usize);
    for batch in todo.chunks(cfg.jobs * 4) {
        let results: Vec<Result<Prediction, PipelineError>> = pool.install(|| {
            batch
                .par_iter()
                .map(|n| run_strategy(strategy, n, task, llm, ret, &opts))
                .collect()
        });
        for (note, r) in batch.iter().zip(results) {
            let rec = match r {
                Ok(p) => {
                    ok += 1;
                    RunRecord::Prediction(p)
                }
                Err(e) if e.is_fatal() => {
                    out.flush().map_err(io_err)?;
                    return Err(CliError::Provider(format!("{}: {e}", note.note_id)));
                }
                Err(e) => {
                    eprintln!("{}: {e}", note.note_id);
                    failed += 1;
                    RunRecord::Failure(FailureRecord::new(&note.note_id, task, strategy, &e))
                }
            };
            write_record(&mut out, &rec).map_err(io_err)?;
        }
        out.flush().map_err(io_err)?;
    }
    eprintln!(
        "{strategy}/{task}: {ok} predictions, {failed} failures, {} skipped as already recorded",
        notes.len() - todo.len()
    );
    Ok(())
}
