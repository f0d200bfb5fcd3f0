//! Corpus-level runs: summarizing every topic, the method comparison, and
//! the hyperparameter grid search.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::embedding::{seeded_hash, EmbeddedCorpus};
use crate::error::{Error, Result};
use crate::rouge::{evaluate_corpus, Metric, ReportKind, RougeReport, Scores};
use crate::scoring::Hyperparams;
use crate::selection::{select_summary, ScoringMode};
use crate::tree::{build_class_tree, ClassTree};
use crate::variants::{summarize_topic, Method, VariantOutput, VariantSpec};

/// Per-topic seed derived from the master seed and the topic id, so adding
/// or removing topics never changes another topic's result.
pub fn topic_seed(master: u64, topic_id: &str) -> u64 {
    seeded_hash(topic_id.as_bytes(), master)
}

/// Runs `f` on a pool of `workers` threads (0 = rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Summarizes every topic with `spec`, each topic seeded from
/// [`topic_seed`]. Output order follows the corpus.
pub fn summarize_corpus(
    embedded: &EmbeddedCorpus,
    spec: &VariantSpec,
) -> Result<Vec<VariantOutput>> {
    embedded
        .topics
        .par_iter()
        .map(|topic| {
            let spec = VariantSpec {
                seed: topic_seed(spec.seed, &topic.topic.topic_id),
                ..*spec
            };
            summarize_topic(topic, &spec)
        })
        .collect()
}

pub fn summary_map(outputs: &[VariantOutput]) -> HashMap<String, String> {
    outputs
        .iter()
        .map(|o| (o.summary.topic_id.clone(), o.summary.text.clone()))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub method: Method,
    pub seed: u64,
    pub report: RougeReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationTable {
    pub kind: ReportKind,
    pub metrics: Vec<Metric>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn mean(&self, method: Method, metric: Metric) -> Option<Scores> {
        self.rows
            .iter()
            .find(|r| r.method == method)
            .and_then(|r| r.report.mean_of(metric))
    }

    /// `method,seed,<metric>...` with corpus-mean values of the report kind.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,seed");
        for m in &self.metrics {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.method, row.seed);
            for s in &row.report.mean {
                let _ = write!(out, ",{:.6}", s.value(self.kind));
            }
            out.push('\n');
        }
        out
    }

    /// Aligned text table, values x100.
    pub fn to_table(&self) -> String {
        let mut out = format!("Mean ROUGE {} (x100)\n{:<12}", self.kind, "method");
        for m in &self.metrics {
            let _ = write!(out, " {:>7}", m.label());
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<12}", row.method.as_str());
            for s in &row.report.mean {
                let _ = write!(out, " {:>7.2}", 100.0 * s.value(self.kind));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs all six methods with the same hyperparameters, budget and seed and
/// evaluates each against the references.
pub fn ablate(
    corpus: &Corpus,
    embedded: &EmbeddedCorpus,
    base: &VariantSpec,
    metrics: &[Metric],
    kind: ReportKind,
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for method in Method::ALL {
        let spec = VariantSpec { method, ..*base };
        let outputs = summarize_corpus(embedded, &spec)?;
        let report = evaluate_corpus(
            &summary_map(&outputs),
            corpus,
            spec.budget,
            metrics,
            kind,
            true,
        )?;
        rows.push(AblationRow {
            method,
            seed: spec.seed,
            report,
        });
    }
    Ok(AblationTable {
        kind,
        metrics: metrics.to_vec(),
        rows,
    })
}

/// Hyperparameter grid in tenths: delta values, (alpha, beta, gamma)
/// triples, and `k` for the second layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub deltas: Vec<u8>,
    pub weights: Vec<(u8, u8, u8)>,
    pub ks: Vec<usize>,
}

impl Grid {
    /// delta in {0, 0.1, ..., 1}, every 0.1-step triple with
    /// alpha + beta + gamma = 1, and k in {2, 3, 4}.
    pub fn full() -> Self {
        Grid {
            deltas: (0..=10).collect(),
            weights: simplex_tenths(),
            ks: vec![2, 3, 4],
        }
    }

    pub fn len(&self) -> usize {
        self.deltas.len() * self.weights.len() * self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every configuration, in ascending (k, delta, alpha, beta, gamma) order.
    pub fn configs(&self, base: &Hyperparams) -> Vec<Hyperparams> {
        let mut ks = self.ks.clone();
        let mut deltas = self.deltas.clone();
        let mut weights = self.weights.clone();
        ks.sort_unstable();
        deltas.sort_unstable();
        weights.sort_unstable();
        let mut out = Vec::with_capacity(self.len());
        for &k in &ks {
            for &d in &deltas {
                for &(a, b, g) in &weights {
                    out.push(Hyperparams {
                        delta: f64::from(d) / 10.0,
                        alpha: f64::from(a) / 10.0,
                        beta: f64::from(b) / 10.0,
                        gamma: f64::from(g) / 10.0,
                        k_first: k,
                        k_rest: base.k_rest,
                    });
                }
            }
        }
        out
    }
}

/// All (alpha, beta, gamma) in tenths with alpha + beta + gamma = 10.
pub fn simplex_tenths() -> Vec<(u8, u8, u8)> {
    let mut out = Vec::new();
    for a in 0..=10u8 {
        for b in 0..=(10 - a) {
            out.push((a, b, 10 - a - b));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Objective {
    pub metric: Metric,
    pub kind: ReportKind,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            metric: Metric::R1,
            kind: ReportKind::Recall,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneResult {
    pub best: Hyperparams,
    pub best_score: f64,
    /// Every configuration with its objective value, in grid order.
    pub scores: Vec<(Hyperparams, f64)>,
}

impl TuneResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,delta,alpha,beta,gamma,objective\n");
        for (hp, score) in &self.scores {
            let _ = writeln!(
                out,
                "{},{:.1},{:.1},{:.1},{:.1},{:.6}",
                hp.k_first, hp.delta, hp.alpha, hp.beta, hp.gamma, score
            );
        }
        out
    }
}

/// Grid search for the main method (`ours-final`) on a corpus with
/// references. The best configuration maximizes the mean objective over
/// topics; ties go to the earliest configuration in grid order.
pub fn tune(
    corpus: &Corpus,
    embedded: &EmbeddedCorpus,
    grid: &Grid,
    base: &VariantSpec,
    objective: Objective,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    for topic in &corpus.topics {
        if topic.references.is_empty() {
            return Err(Error::MissingReferences(topic.topic_id.clone()));
        }
    }
    base.budget.validate()?;
    let configs = grid.configs(&base.hp);

    // Trees depend only on k (and the seed), not on the scoring weights.
    let mut ks = grid.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut trees: HashMap<usize, Vec<ClassTree>> = HashMap::new();
    for &k in &ks {
        let per_topic = embedded
            .topics
            .par_iter()
            .map(|topic| {
                let spec = VariantSpec {
                    seed: topic_seed(base.seed, &topic.topic.topic_id),
                    hp: Hyperparams {
                        k_first: k,
                        ..base.hp
                    },
                    ..*base
                };
                build_class_tree(&topic.document_vectors, spec.tree_params(topic)?)
            })
            .collect::<Result<Vec<_>>>()?;
        trees.insert(k, per_topic);
    }

    let scores = configs
        .par_iter()
        .map(|hp| {
            hp.validate()?;
            let topic_trees = &trees[&hp.k_first];
            let mut total = 0.0;
            for (topic, tree) in embedded.topics.iter().zip(topic_trees) {
                let summary = select_summary(tree, topic, hp, base.budget, ScoringMode::Final)?;
                let candidate = crate::rouge::truncate(&summary.text, base.budget);
                let refs = &corpus
                    .topic(&topic.topic.topic_id)
                    .ok_or_else(|| Error::MissingReferences(topic.topic.topic_id.clone()))?
                    .references;
                total += objective
                    .metric
                    .score(&candidate, refs, true)
                    .value(objective.kind);
            }
            Ok((*hp, total / embedded.topics.len().max(1) as f64))
        })
        .collect::<Result<Vec<_>>>()?;

    let (best, best_score) = scores
        .iter()
        .fold(None::<(Hyperparams, f64)>, |acc, &(hp, s)| match acc {
            Some((_, b)) if s <= b => acc,
            _ => Some((hp, s)),
        })
        .expect("non-empty grid");
    Ok(TuneResult {
        best,
        best_score,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_has_66_points() {
        let s = simplex_tenths();
        assert_eq!(s.len(), 66);
        assert!(s.iter().all(|&(a, b, g)| a + b + g == 10));
    }

    #[test]
    fn full_grid_size() {
        let g = Grid::full();
        assert_eq!(g.len(), 2178);
        assert_eq!(g.configs(&Hyperparams::default()).len(), 2178);
    }

    #[test]
    fn configs_are_lexicographic() {
        let g = Grid {
            deltas: vec![9, 1],
            weights: vec![(1, 0, 9), (0, 1, 9)],
            ks: vec![3, 2],
        };
        let c = g.configs(&Hyperparams::default());
        assert_eq!(c.len(), 8);
        assert_eq!((c[0].k_first, c[0].delta, c[0].alpha), (2, 0.1, 0.0));
        assert_eq!((c[7].k_first, c[7].delta, c[7].alpha), (3, 0.9, 0.1));
    }

    #[test]
    fn topic_seeds_differ_and_are_stable() {
        assert_eq!(topic_seed(7, "d30001t"), topic_seed(7, "d30001t"));
        assert_ne!(topic_seed(7, "d30001t"), topic_seed(7, "d30002t"));
        assert_ne!(topic_seed(7, "d30001t"), topic_seed(8, "d30001t"));
    }
}
