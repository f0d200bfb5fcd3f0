use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use comspec::corpus::{load_corpus, Corpus, Topic};
use comspec::embedding::{embed_corpus, EmbeddedCorpus};
use comspec::experiment::{self, summarize_corpus, summary_map, topic_seed, with_workers};
use comspec::rouge::evaluate_corpus;
use comspec::tree::ClassTree;
use comspec::variants::Method;
use serde::Serialize;

use crate::config::RunConfig;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(config: &RunConfig) -> Result<&Path> {
    let out = config.require_out()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    config.echo(out)?;
    Ok(out)
}

fn load(config: &RunConfig) -> Result<Corpus> {
    let input = config.require_input()?;
    let corpus = load_corpus(input, config.layout)?;
    eprintln!(
        "loaded {} topics from {}",
        corpus.topics.len(),
        input.display()
    );
    Ok(corpus)
}

/// Hash seed of the builtin embedder. Fixed so `--seed` only moves clustering.
const EMBEDDER_SEED: u64 = 0;

fn embed(config: &RunConfig, corpus: &Corpus) -> Result<EmbeddedCorpus> {
    let provider = config.embedder.build(EMBEDDER_SEED)?;
    Ok(embed_corpus(corpus, provider.as_ref())?)
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    topic_id: &'a str,
    summary: &'a str,
    sentences: &'a [comspec::selection::SummarySentence],
}

#[derive(Serialize)]
struct TreeNodeRecord {
    node_id: usize,
    layer: usize,
    traversal_position: usize,
    parent: Option<usize>,
    children: Vec<usize>,
    /// Document ids, or `doc_id#position` when sentences were clustered.
    members: Vec<String>,
}

#[derive(Serialize)]
struct TreeRecord<'a> {
    topic_id: &'a str,
    nodes: Vec<TreeNodeRecord>,
}

/// Labels for the clustered units, in the index order the tree uses.
fn unit_labels(topic: &Topic, method: Method) -> Vec<String> {
    if method == Method::Comp4 {
        topic
            .documents
            .iter()
            .flat_map(|d| {
                d.sentences
                    .iter()
                    .map(move |s| format!("{}#{}", d.doc_id, s.position()))
            })
            .collect()
    } else {
        topic.documents.iter().map(|d| d.doc_id.clone()).collect()
    }
}

fn tree_record<'a>(topic: &'a Topic, tree: &ClassTree, method: Method) -> TreeRecord<'a> {
    let labels = unit_labels(topic, method);
    let rank = tree.traversal_rank();
    let nodes = tree
        .nodes
        .iter()
        .map(|n| TreeNodeRecord {
            node_id: n.node_id,
            layer: n.layer,
            traversal_position: rank[n.node_id],
            parent: n.parent,
            children: n.children.clone(),
            members: n.members.iter().map(|&m| labels[m].clone()).collect(),
        })
        .collect();
    TreeRecord {
        topic_id: &topic.topic_id,
        nodes,
    }
}

fn jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, &r)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn summarize(config: &RunConfig) -> Result<()> {
    let spec = config.variant_spec()?;
    let out = prepare_out(config)?;
    let corpus = load(config)?;
    let outputs = with_workers(config.workers, || -> Result<_> {
        let embedded = embed(config, &corpus)?;
        Ok(summarize_corpus(&embedded, &spec)?)
    })??;

    for o in &outputs {
        let s = &o.summary;
        write_file(
            &out.join(format!("{}.txt", s.topic_id)),
            format!("{}\n", s.text),
        )?;
    }
    let records = outputs.iter().map(|o| SummaryRecord {
        topic_id: &o.summary.topic_id,
        summary: &o.summary.text,
        sentences: &o.summary.sentences,
    });
    write_file(&out.join("summaries.jsonl"), jsonl(records)?)?;

    if config.dump_tree {
        let trees =
            corpus.topics.iter().zip(&outputs).filter_map(|(topic, o)| {
                o.tree.as_ref().map(|t| tree_record(topic, t, spec.method))
            });
        write_file(&out.join("trees.jsonl"), jsonl(trees)?)?;
    }
    eprintln!("wrote {} summaries to {}", outputs.len(), out.display());
    Ok(())
}

/// Reads `<topic_id>.txt` for every topic; absent files are left out so the
/// evaluator can name the first missing topic.
fn read_summaries(dir: &Path, corpus: &Corpus) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for topic in &corpus.topics {
        let path = dir.join(format!("{}.txt", topic.topic_id));
        match fs::read_to_string(&path) {
            Ok(text) => {
                map.insert(topic.topic_id.clone(), text);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
        }
    }
    Ok(map)
}

pub fn evaluate(config: &RunConfig) -> Result<()> {
    let budget = config.require_budget()?;
    let out = prepare_out(config)?;
    let corpus = load(config)?;
    let summaries = match &config.summaries {
        Some(dir) => read_summaries(dir, &corpus)?,
        None => {
            // No summaries given: generate them with the configured method.
            let spec = config.variant_spec()?;
            with_workers(config.workers, || -> Result<_> {
                let embedded = embed(config, &corpus)?;
                Ok(summary_map(&summarize_corpus(&embedded, &spec)?))
            })??
        }
    };
    let report = evaluate_corpus(
        &summaries,
        &corpus,
        budget,
        &config.metrics,
        config.report,
        true,
    )?;
    let table = report.to_table();
    write_file(&out.join("report.txt"), &table)?;
    write_file(&out.join("report.csv"), report.to_csv())?;
    print!("{table}");
    Ok(())
}

pub fn ablate(config: &RunConfig) -> Result<()> {
    let base = config.variant_spec()?;
    let out = prepare_out(config)?;
    let corpus = load(config)?;
    let table = with_workers(config.workers, || -> Result<_> {
        let embedded = embed(config, &corpus)?;
        Ok(experiment::ablate(
            &corpus,
            &embedded,
            &base,
            &config.metrics,
            config.report,
        )?)
    })??;
    for row in &table.rows {
        eprintln!("{}: master seed {}", row.method, row.seed);
    }
    if let Some(topic) = corpus.topics.first() {
        eprintln!(
            "per-topic seeds derive from the master seed, e.g. {} -> {}",
            topic.topic_id,
            topic_seed(base.seed, &topic.topic_id)
        );
    }
    let text = table.to_table();
    write_file(&out.join("ablation.txt"), &text)?;
    write_file(&out.join("ablation.csv"), table.to_csv())?;
    print!("{text}");
    Ok(())
}

pub fn tune(config: &RunConfig) -> Result<()> {
    let base = config.variant_spec()?;
    let grid = config.grid.grid();
    let out = prepare_out(config)?;
    let corpus = load(config)?;
    eprintln!("searching {} configurations", grid.len());
    let result = with_workers(config.workers, || -> Result<_> {
        let embedded = embed(config, &corpus)?;
        Ok(experiment::tune(
            &corpus,
            &embedded,
            &grid,
            &base,
            config.objective,
        )?)
    })??;
    write_file(&out.join("tune.csv"), result.to_csv())?;

    let best = RunConfig {
        hp: result.best,
        ..config.clone()
    };
    write_file(&out.join("best_config.txt"), best.to_text())?;
    let hp = result.best;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "best: k-first={} delta={:.1} alpha={:.1} beta={:.1} gamma={:.1} {}={:.6}",
        hp.k_first,
        hp.delta,
        hp.alpha,
        hp.beta,
        hp.gamma,
        config.objective.metric,
        result.best_score
    )?;
    Ok(())
}
