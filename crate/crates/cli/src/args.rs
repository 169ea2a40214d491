use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phenorag_core::config::PartialConfig;
use phenorag_core::{Strategy, Task};

#[derive(Debug, Parser)]
#[command(
    name = "phenorag",
    version,
    about = "Gene prioritization and rare-disease diagnosis from clinical notes",
    after_help = "Exit codes: 0 ok, 1 usage or config, 2 ingest or chunk store, 3 index or embedding, \
                  4 model provider, 5 evaluation.\n\
                  Settings resolve as: flag > PHENORAG_<KEY> env var > config file > default."
)]
pub struct Cli {
    /// TOML config file. Falls back to $PHENORAG_CONFIG, then ./phenorag.toml if present.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse knowledge sources and write a chunk store.
    Ingest(IngestArgs),
    /// Embed a chunk store into a dense index.
    Index(IndexArgs),
    /// Run one strategy over a set of notes.
    Run(RunArgs),
    /// Score predictions against truth labels.
    Eval(EvalArgs),
    /// Chunk length statistics for a store.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input files; `.json`/`.jsonl` are read as HPO records, anything else as OMIM text.
    pub inputs: Vec<PathBuf>,
    /// HPO record file (JSON lines), regardless of extension.
    #[arg(long, value_name = "FILE")]
    pub hpo: Vec<PathBuf>,
    /// OMIM text file, regardless of extension.
    #[arg(long, value_name = "FILE")]
    pub omim: Vec<PathBuf>,
    /// Chunk store to write.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Log rejected records and continue instead of failing.
    #[arg(long)]
    pub skip_bad: bool,
}

#[derive(Debug, Args, Default)]
pub struct EmbedArgs {
    /// Use the deterministic hash embedder.
    #[arg(long)]
    pub mock_embed: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "URL")]
    pub embed_url: Option<String>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub embed: EmbedArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Notes as JSON lines, or a plain-text file holding a single note.
    #[arg(long)]
    pub notes: PathBuf,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub task: Option<Task>,
    /// Dense index; required by rag, rag-cot and cot-rag.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Chunk store the index was built from.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Answer model calls from a script instead of a remote endpoint.
    #[arg(long, value_name = "SCRIPT")]
    pub mock_llm: Option<PathBuf>,
    #[command(flatten)]
    pub embed: EmbedArgs,
    /// Predictions file (JSON lines); stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Process at most this many notes.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Skip notes already recorded in --out and append the rest.
    #[arg(long, requires = "out")]
    pub resume: bool,
    /// Prompt token window (2048 standard, 5120 for long notes).
    #[arg(long)]
    pub window: Option<usize>,
    /// Append every model call to this JSON-lines file.
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_name = "URL")]
    pub llm_url: Option<String>,
    #[arg(long)]
    pub dense_k: Option<usize>,
    #[arg(long)]
    pub rerank_keep: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Notes with truth labels (JSON lines).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Disease synonym table (JSON lines of {canonical, synonyms}).
    #[arg(long, value_name = "FILE")]
    pub synonyms: Option<PathBuf>,
    /// Also accept diseases whose embeddings reach the similarity threshold.
    #[arg(long)]
    pub embed_match: bool,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub embed: EmbedArgs,
    /// Directory for report.json, report.csv and report.txt.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Format printed to stdout.
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Also write the statistics as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub bin_width: usize,
}

impl EmbedArgs {
    pub fn layer(&self, p: &mut PartialConfig) {
        set(&mut p.seed, self.seed);
        set(&mut p.embed_dim, self.embed_dim);
        if let Some(u) = &self.embed_url {
            p.embed_url = Some(Some(u.clone()));
        }
    }
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl Command {
    /// Settings given as flags, as the highest-precedence config layer.
    pub fn config_layer(&self) -> PartialConfig {
        let mut p = PartialConfig::default();
        match self {
            Command::Ingest(a) => set(&mut p.chunk_size, a.chunk_size),
            Command::Index(a) => a.embed.layer(&mut p),
            Command::Run(a) => {
                a.embed.layer(&mut p);
                set(&mut p.strategy, a.strategy);
                set(&mut p.task, a.task);
                set(&mut p.jobs, a.jobs);
                set(&mut p.context_window, a.window);
                set(&mut p.llm_model, a.model.clone());
                set(&mut p.dense_k, a.dense_k);
                set(&mut p.rerank_keep, a.rerank_keep);
                set(&mut p.temperature, a.temperature);
                if let Some(u) = &a.llm_url {
                    p.llm_url = Some(Some(u.clone()));
                }
            }
            Command::Eval(a) => {
                a.embed.layer(&mut p);
                set(&mut p.semantic_threshold, a.threshold);
            }
            Command::Stats(_) => {}
        }
        p
    }
}
