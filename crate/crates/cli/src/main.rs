mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{overlay, read_pairs, ConfigError, RunConfig};

#[derive(Parser)]
#[command(
    name = "comspec",
    version,
    about = "Hierarchical-clustering multi-document summarizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one summary per topic.
    Summarize(Options),
    /// Score existing summaries against the references.
    Evaluate(Options),
    /// Compare all six methods under one configuration.
    Ablate(Options),
    /// Grid-search the hyperparameters of the main method.
    Tune(Options),
}

/// Every flag doubles as a config-file key of the same name.
#[derive(Args)]
struct Options {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus root (topic directories) or JSONL file.
    #[arg(long)]
    input: Option<String>,
    /// topic-dirs | jsonl
    #[arg(long)]
    layout: Option<String>,
    /// ours-final | ours-cs | comp1 | comp2 | comp3 | comp4
    #[arg(long)]
    method: Option<String>,
    #[arg(long, conflicts_with = "budget_bytes")]
    budget_words: Option<String>,
    #[arg(long)]
    budget_bytes: Option<String>,
    /// builtin:DIM | file:PATH | remote:URL
    #[arg(long)]
    embedder: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    k_first: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Node bound for the class tree; derived from the budget when unset.
    #[arg(long)]
    max_nodes: Option<String>,
    /// Comma-separated subset of r1,r2,rl,rsu4.
    #[arg(long)]
    metrics: Option<String>,
    /// recall | f1
    #[arg(long)]
    report: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<String>,
    /// Directory of `<topic_id>.txt` summaries (evaluate).
    #[arg(long)]
    summaries: Option<String>,
    /// Also write trees.jsonl (summarize).
    #[arg(long)]
    dump_tree: bool,
    /// Tuning range for delta, `MIN:MAX` in steps of 0.1.
    #[arg(long)]
    grid_delta: Option<String>,
    #[arg(long)]
    grid_alpha: Option<String>,
    #[arg(long)]
    grid_beta: Option<String>,
    #[arg(long)]
    grid_gamma: Option<String>,
    /// Tuning range for k, `MIN:MAX`.
    #[arg(long)]
    grid_k: Option<String>,
    /// Tuning objective, `metric:kind` (e.g. r1:recall).
    #[arg(long)]
    objective: Option<String>,
}

impl Options {
    fn flag_pairs(&self) -> BTreeMap<String, String> {
        let flags = [
            ("input", &self.input),
            ("layout", &self.layout),
            ("method", &self.method),
            ("budget-words", &self.budget_words),
            ("budget-bytes", &self.budget_bytes),
            ("embedder", &self.embedder),
            ("seed", &self.seed),
            ("k-first", &self.k_first),
            ("delta", &self.delta),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("max-nodes", &self.max_nodes),
            ("metrics", &self.metrics),
            ("report", &self.report),
            ("out", &self.out),
            ("workers", &self.workers),
            ("summaries", &self.summaries),
            ("grid-delta", &self.grid_delta),
            ("grid-alpha", &self.grid_alpha),
            ("grid-beta", &self.grid_beta),
            ("grid-gamma", &self.grid_gamma),
            ("grid-k", &self.grid_k),
            ("objective", &self.objective),
        ];
        let mut pairs: BTreeMap<String, String> = flags
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if self.dump_tree {
            pairs.insert("dump-tree".into(), "true".into());
        }
        pairs
    }

    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(path) => read_pairs(path)?,
            None => BTreeMap::new(),
        };
        RunConfig::from_pairs(&overlay(file, self.flag_pairs()))
    }
}

/// 2 for bad input or configuration, 3 for embedding-provider failures,
/// 1 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<comspec::Error>() {
            return if e.is_provider() { 3 } else { 2 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Summarize(o) => o.resolve().and_then(|c| commands::summarize(&c)),
        Command::Evaluate(o) => o.resolve().and_then(|c| commands::evaluate(&c)),
        Command::Ablate(o) => o.resolve().and_then(|c| commands::ablate(&c)),
        Command::Tune(o) => o.resolve().and_then(|c| commands::tune(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
