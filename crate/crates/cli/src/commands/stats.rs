use phenorag_core::corpus::compute_corpus_stats_with_bin_width;
use phenorag_core::{RunConfig, TOOL_VERSION};
use serde_json::json;

use super::{create, emit, read_store};
use crate::args::StatsArgs;
use crate::error::{at, CliError, CliResult};

pub fn stats(a: &StatsArgs, cfg: &RunConfig) -> CliResult {
    let chunks = read_store(&a.store)?;
    let s = compute_corpus_stats_with_bin_width(&chunks, a.bin_width).map_err(|e| CliError::Ingest(e.to_string()))?;

    let mut text = format!(
        "chunks: {}\ntokens: mean {:.2}  median {:.1}  min {}  max {}\n",
        s.total_chunks, s.token_count_mean, s.token_count_median, s.min_tokens, s.max_tokens
    );
    for (source, l) in &s.per_source {
        text += &format!(
            "  {source}: {} chunks, mean {:.2}, median {:.1}, min {}, max {}\n",
            l.count, l.mean, l.median, l.min, l.max
        );
    }
    text += "histogram:\n";
    for b in &s.histogram {
        text += &format!("  [{:>5}, {:>5})  {}\n", b.lower, b.upper, b.count);
    }
    emit(&text)?;

    if let Some(path) = &a.json {
        let doc = json!({ "tool_version": TOOL_VERSION, "config": cfg, "stats": s });
        let mut w = create(path, CliError::Ingest)?;
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::Ingest(at(path, e)))?;
        std::io::Write::write_all(&mut w, b"\n").map_err(|e| CliError::Ingest(at(path, e)))?;
    }
    Ok(())
}
