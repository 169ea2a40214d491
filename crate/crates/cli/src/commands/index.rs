use phenorag_core::retrieval::{build_index, write_index};
use phenorag_core::RunConfig;

use super::{artifact_meta, create, embedder, read_store};
use crate::args::IndexArgs;
use crate::error::{at, CliError, CliResult};

pub fn index(a: &IndexArgs, cfg: &RunConfig) -> CliResult {
    let chunks = read_store(&a.store)?;
    let embedder = embedder(&a.embed, cfg)?;
    let index = build_index(&chunks, embedder.as_ref()).map_err(|e| CliError::Index(e.to_string()))?;
    let w = create(&a.out, CliError::Index)?;
    write_index(w, &index, &artifact_meta(cfg)).map_err(|e| CliError::Index(at(&a.out, e)))?;
    println!(
        "indexed {} chunks (dim {}, fingerprint {}) -> {}",
        index.len(),
        index.dimension(),
        &index.fingerprint()[..12],
        a.out.display()
    );
    Ok(())
}
