mod eval;
mod index;
mod ingest;
mod run;
mod stats;

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::path::Path;

use phenorag_core::corpus::{read_chunk_store, Chunk};
use phenorag_core::embedding::Embedder;
use phenorag_core::{MockEmbedder, RemoteEmbedder, RunConfig, TOOL_VERSION};
use serde_json::json;

use crate::args::EmbedArgs;
use crate::error::{at, CliError, CliResult};

pub use eval::eval;
pub use index::index;
pub use ingest::ingest;
pub use run::run;
pub use stats::stats;

/// Metadata stamped into every artifact.
fn artifact_meta(cfg: &RunConfig) -> serde_json::Value {
    json!({ "tool_version": TOOL_VERSION, "config": cfg })
}

fn create(path: &Path, err: fn(String) -> CliError) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| err(at(path, e)))
}

fn read_store(path: &Path) -> CliResult<Vec<Chunk>> {
    let f = File::open(path).map_err(|e| CliError::Ingest(at(path, e)))?;
    let (_, chunks) = read_chunk_store(BufReader::new(f)).map_err(|e| CliError::Ingest(at(path, e)))?;
    Ok(chunks)
}

fn embedder(args: &EmbedArgs, cfg: &RunConfig) -> CliResult<Box<dyn Embedder<f64>>> {
    if args.mock_embed {
        return Ok(Box::new(MockEmbedder::with_dim(cfg.seed, cfg.embed_dim)));
    }
    match cfg.remote_embed() {
        Some(rc) => Ok(Box::new(RemoteEmbedder::new(rc).map_err(|e| CliError::Index(e.to_string()))?)),
        None => Err(CliError::Usage(
            "no embedder configured: pass --mock-embed or set embed_url".into(),
        )),
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(CliError::Usage(format!("writing to stdout: {e}"))),
        _ => Ok(()),
    }
}
