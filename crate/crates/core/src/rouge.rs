//! ROUGE-1, ROUGE-2, ROUGE-L and ROUGE-SU4 with length truncation and
//! multi-reference averaging.
//!
//! Tokens are lowercased alphanumeric runs. With stemming on, tokens longer
//! than three characters are Porter-stemmed, as the original toolkit does.
//! Scores against several references are averaged per reference (recall and
//! precision separately); F1 is the harmonic mean of the averaged values.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::hash::Hash;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{segment_sentences, Corpus};
use crate::error::{Error, Result};
use crate::porter::porter_stem;
use crate::selection::{Budget, BudgetUnit};

/// Maximum number of tokens between the two words of a skip-bigram.
const SKIP_GAP: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Scores {
    pub fn new(recall: f64, precision: f64) -> Self {
        let f1 = if recall + precision > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Scores {
            recall,
            precision,
            f1,
        }
    }

    pub fn value(&self, kind: ReportKind) -> f64 {
        match kind {
            ReportKind::Recall => self.recall,
            ReportKind::F1 => self.f1,
        }
    }

    fn averaged(per_reference: &[(f64, f64)]) -> Self {
        if per_reference.is_empty() {
            return Scores::default();
        }
        let n = per_reference.len() as f64;
        let r = per_reference.iter().map(|x| x.0).sum::<f64>() / n;
        let p = per_reference.iter().map(|x| x.1).sum::<f64>() / n;
        Scores::new(r, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    R1,
    R2,
    RL,
    RSU4,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::R1, Metric::R2, Metric::RL, Metric::RSU4];

    pub fn key(self) -> &'static str {
        match self {
            Metric::R1 => "r1",
            Metric::R2 => "r2",
            Metric::RL => "rl",
            Metric::RSU4 => "rsu4",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::R1 => "R-1",
            Metric::R2 => "R-2",
            Metric::RL => "R-L",
            Metric::RSU4 => "R-SU4",
        }
    }

    pub fn score(self, candidate: &str, references: &[String], stem: bool) -> Scores {
        match self {
            Metric::R1 => rouge_n(candidate, references, 1, stem),
            Metric::R2 => rouge_n(candidate, references, 2, stem),
            Metric::RL => rouge_l(candidate, references, stem),
            Metric::RSU4 => rouge_su4(candidate, references, stem),
        }
    }

    /// Parses a comma-separated list such as `r1,r2,rl,rsu4`.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let metrics = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Metric>>>()?;
        if metrics.is_empty() {
            return Err(Error::InvalidParameter("empty metric list".into()));
        }
        Ok(metrics)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.key() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric {s:?}")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Recall,
    F1,
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recall" => Ok(ReportKind::Recall),
            "f1" => Ok(ReportKind::F1),
            _ => Err(Error::InvalidParameter(format!(
                "unknown report kind {s:?}"
            ))),
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportKind::Recall => "recall",
            ReportKind::F1 => "f1",
        })
    }
}

/// Lowercased alphanumeric tokens, optionally stemmed.
pub fn tokenize(text: &str, stem: bool) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let t = t.to_lowercase();
            if stem && t.chars().count() > 3 {
                porter_stem(&t)
            } else {
                t
            }
        })
        .collect()
}

/// Cuts `text` to the budget on whole-token boundaries. Byte budgets count
/// the single spaces between kept tokens.
pub fn truncate(text: &str, budget: Budget) -> String {
    let tokens = text.split_whitespace();
    match budget.unit {
        BudgetUnit::Words => tokens.take(budget.limit).collect::<Vec<_>>().join(" "),
        BudgetUnit::Bytes => {
            let mut out = String::new();
            for tok in tokens {
                let extra = if out.is_empty() {
                    tok.len()
                } else {
                    tok.len() + 1
                };
                if out.len() + extra > budget.limit {
                    break;
                }
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(tok);
            }
            out
        }
    }
}

fn counts<T: Eq + Hash, I: IntoIterator<Item = T>>(items: I) -> HashMap<T, usize> {
    let mut map = HashMap::new();
    for x in items {
        *map.entry(x).or_insert(0) += 1;
    }
    map
}

fn clipped_overlap<T: Eq + Hash>(a: &HashMap<T, usize>, b: &HashMap<T, usize>) -> usize {
    a.iter()
        .map(|(k, &n)| n.min(b.get(k).copied().unwrap_or(0)))
        .sum()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    if tokens.len() < n {
        return HashMap::new();
    }
    counts(tokens.windows(n))
}

/// Recall and precision of clipped overlap between two count tables.
fn overlap_scores<T: Eq + Hash>(
    cand: &HashMap<T, usize>,
    reference: &HashMap<T, usize>,
) -> (f64, f64) {
    let hit = clipped_overlap(cand, reference);
    (
        ratio(hit, reference.values().sum()),
        ratio(hit, cand.values().sum()),
    )
}

pub fn rouge_n(candidate: &str, references: &[String], n: usize, stem: bool) -> Scores {
    let cand_tokens = tokenize(candidate, stem);
    let cand = ngrams(&cand_tokens, n);
    let per_ref: Vec<(f64, f64)> = references
        .iter()
        .map(|r| {
            let toks = tokenize(r, stem);
            overlap_scores(&cand, &ngrams(&toks, n))
        })
        .collect();
    Scores::averaged(&per_ref)
}

/// Skip-bigrams with at most four tokens between the pair, plus unigrams.
fn skip_bigrams_with_unigrams(tokens: &[String]) -> HashMap<(&str, &str), usize> {
    let mut map = HashMap::new();
    for (i, a) in tokens.iter().enumerate() {
        *map.entry((a.as_str(), "")).or_insert(0) += 1;
        for b in tokens.iter().skip(i + 1).take(SKIP_GAP + 1) {
            *map.entry((a.as_str(), b.as_str())).or_insert(0) += 1;
        }
    }
    map
}

pub fn rouge_su4(candidate: &str, references: &[String], stem: bool) -> Scores {
    let cand_tokens = tokenize(candidate, stem);
    let cand = skip_bigrams_with_unigrams(&cand_tokens);
    let per_ref: Vec<(f64, f64)> = references
        .iter()
        .map(|r| {
            let toks = tokenize(r, stem);
            overlap_scores(&cand, &skip_bigrams_with_unigrams(&toks))
        })
        .collect();
    Scores::averaged(&per_ref)
}

/// Tokenized sentences: lines first, then the sentence segmenter.
fn sentence_tokens(text: &str, stem: bool) -> Vec<Vec<String>> {
    text.lines()
        .flat_map(segment_sentences)
        .map(|s| tokenize(&s.text, stem))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Indices into `a` of one longest common subsequence of `a` and `b`.
pub(crate) fn lcs_positions(a: &[String], b: &[String]) -> Vec<usize> {
    let (n, m) = (a.len(), b.len());
    let mut table = vec![vec![0usize; m + 1]; n + 1];
    for i in 0..n {
        for j in 0..m {
            table[i + 1][j + 1] = if a[i] == b[j] {
                table[i][j] + 1
            } else {
                table[i][j + 1].max(table[i + 1][j])
            };
        }
    }
    let mut hits = Vec::with_capacity(table[n][m]);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        if a[i - 1] == b[j - 1] {
            hits.push(i - 1);
            i -= 1;
            j -= 1;
        } else if table[i - 1][j] >= table[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    hits.reverse();
    hits
}

/// Summary-level LCS: for each reference sentence, the union of its LCS
/// matches against every candidate sentence, with each token credited at most
/// as often as it occurs in both texts.
fn union_lcs_scores(cand: &[Vec<String>], reference: &[Vec<String>]) -> (f64, f64) {
    let cand_len: usize = cand.iter().map(Vec::len).sum();
    let ref_len: usize = reference.iter().map(Vec::len).sum();
    let mut cand_left = counts(cand.iter().flatten().map(String::as_str));
    let mut ref_left = counts(reference.iter().flatten().map(String::as_str));
    let mut hit = 0usize;
    for r in reference {
        let mut union = vec![false; r.len()];
        for c in cand {
            for i in lcs_positions(r, c) {
                union[i] = true;
            }
        }
        for (tok, _) in r.iter().zip(&union).filter(|(_, hit)| **hit) {
            let tok = tok.as_str();
            let (Some(cl), Some(rl)) = (cand_left.get(tok).copied(), ref_left.get(tok).copied())
            else {
                continue;
            };
            if cl > 0 && rl > 0 {
                hit += 1;
                cand_left.insert(tok, cl - 1);
                ref_left.insert(tok, rl - 1);
            }
        }
    }
    (ratio(hit, ref_len), ratio(hit, cand_len))
}

pub fn rouge_l(candidate: &str, references: &[String], stem: bool) -> Scores {
    let cand = sentence_tokens(candidate, stem);
    let per_ref: Vec<(f64, f64)> = references
        .iter()
        .map(|r| union_lcs_scores(&cand, &sentence_tokens(r, stem)))
        .collect();
    Scores::averaged(&per_ref)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicScores {
    pub topic_id: String,
    /// Parallel to `RougeReport::metrics`.
    pub scores: Vec<Scores>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RougeReport {
    pub kind: ReportKind,
    pub metrics: Vec<Metric>,
    pub topics: Vec<TopicScores>,
    /// Arithmetic means over topics, parallel to `metrics`.
    pub mean: Vec<Scores>,
}

impl RougeReport {
    pub fn mean_of(&self, metric: Metric) -> Option<Scores> {
        self.metrics
            .iter()
            .position(|&m| m == metric)
            .map(|i| self.mean[i])
    }

    /// `topic_id,metric,recall,precision,f1` rows, with a final block of
    /// `MEAN` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("topic_id,metric,recall,precision,f1\n");
        let rows = self
            .topics
            .iter()
            .map(|t| (t.topic_id.as_str(), &t.scores))
            .chain(std::iter::once(("MEAN", &self.mean)));
        for (topic, scores) in rows {
            for (m, s) in self.metrics.iter().zip(scores) {
                let _ = writeln!(
                    out,
                    "{topic},{m},{:.6},{:.6},{:.6}",
                    s.recall, s.precision, s.f1
                );
            }
        }
        out
    }

    /// Aligned table of the report kind's value (x100) per topic and metric.
    pub fn to_table(&self) -> String {
        let width = self
            .topics
            .iter()
            .map(|t| t.topic_id.len())
            .max()
            .unwrap_or(0)
            .max("MEAN".len());
        let mut out = format!("ROUGE {} (x100)\n{:<width$}", self.kind, "topic");
        for m in &self.metrics {
            let _ = write!(out, " {:>7}", m.label());
        }
        out.push('\n');
        let rows = self
            .topics
            .iter()
            .map(|t| (t.topic_id.as_str(), &t.scores))
            .chain(std::iter::once(("MEAN", &self.mean)));
        for (topic, scores) in rows {
            let _ = write!(out, "{topic:<width$}");
            for s in scores {
                let _ = write!(out, " {:>7.2}", 100.0 * s.value(self.kind));
            }
            out.push('\n');
        }
        out
    }
}

/// Truncates each topic's summary to the budget and scores it against the
/// topic's references. `summaries` maps topic id to summary text; every
/// topic of the corpus must have one.
pub fn evaluate_corpus(
    summaries: &HashMap<String, String>,
    corpus: &Corpus,
    budget: Budget,
    metrics: &[Metric],
    kind: ReportKind,
    stem: bool,
) -> Result<RougeReport> {
    if metrics.is_empty() {
        return Err(Error::InvalidParameter("no metrics requested".into()));
    }
    for topic in &corpus.topics {
        if topic.references.is_empty() {
            return Err(Error::MissingReferences(topic.topic_id.clone()));
        }
        if !summaries.contains_key(&topic.topic_id) {
            return Err(Error::MissingSummary(topic.topic_id.clone()));
        }
    }
    let topics: Vec<TopicScores> = corpus
        .topics
        .par_iter()
        .map(|topic| {
            let candidate = truncate(&summaries[&topic.topic_id], budget);
            TopicScores {
                topic_id: topic.topic_id.clone(),
                scores: metrics
                    .iter()
                    .map(|m| m.score(&candidate, &topic.references, stem))
                    .collect(),
            }
        })
        .collect();
    let n = topics.len().max(1) as f64;
    let mean = (0..metrics.len())
        .map(|i| {
            let sum =
                |f: fn(&Scores) -> f64| topics.iter().map(|t| f(&t.scores[i])).sum::<f64>() / n;
            Scores {
                recall: sum(|s| s.recall),
                precision: sum(|s| s.precision),
                f1: sum(|s| s.f1),
            }
        })
        .collect();
    Ok(RougeReport {
        kind,
        metrics: metrics.to_vec(),
        topics,
        mean,
    })
}
