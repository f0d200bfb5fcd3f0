//! Sentence selection over the class tree and summary assembly.
//!
//! Nodes are visited in traversal order, one sentence per node per
//! iteration. When the last node has been visited and the budget is not yet
//! met, the next iteration starts again at the root. The sentence that
//! crosses the budget is kept; evaluation truncates the overshoot.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, SentenceRef};
use crate::embedding::{EmbeddedTopic, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scoring::{
    node_centroids, score_cs, score_final, score_nr, score_position, Hyperparams,
};
use crate::tree::{ClassTree, ClassTreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetUnit {
    Words,
    Bytes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub unit: BudgetUnit,
    pub limit: usize,
}

impl Budget {
    pub fn words(limit: usize) -> Self {
        Budget {
            unit: BudgetUnit::Words,
            limit,
        }
    }

    pub fn bytes(limit: usize) -> Self {
        Budget {
            unit: BudgetUnit::Bytes,
            limit,
        }
    }

    pub fn size_of(&self, sentence: &Sentence) -> usize {
        match self.unit {
            BudgetUnit::Words => sentence.word_count,
            BudgetUnit::Bytes => sentence.byte_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.limit < 1 {
            return Err(Error::InvalidParameter(
                "budget limit must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.unit {
            BudgetUnit::Words => write!(f, "words:{}", self.limit),
            BudgetUnit::Bytes => write!(f, "bytes:{}", self.limit),
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("budget {s:?} must be words:N or bytes:N"));
        let (unit, n) = s.split_once(':').ok_or_else(bad)?;
        let limit = n.parse().map_err(|_| bad())?;
        match unit {
            "words" => Ok(Budget::words(limit)),
            "bytes" => Ok(Budget::bytes(limit)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringMode {
    CsOnly,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Selection {
    pub sentence: SentenceRef,
    pub node_id: usize,
    pub iteration: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionState {
    /// In selection order.
    pub selected: Vec<Selection>,
    /// Vectors of the selected sentences, parallel to `selected`.
    pub selected_vectors: Vec<EmbeddingVector>,
    /// Budget units used so far.
    pub consumed: usize,
    pub iteration: usize,
}

impl SelectionState {
    pub fn contains(&self, at: SentenceRef) -> bool {
        self.selected.iter().any(|s| s.sentence == at)
    }

    pub fn push(&mut self, selection: Selection, vector: EmbeddingVector, size: usize) {
        self.selected.push(selection);
        self.selected_vectors.push(vector);
        self.consumed += size;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummarySentence {
    pub text: String,
    pub node_id: usize,
    pub doc_id: String,
    /// 1-based position in the source document.
    pub position: usize,
    #[serde(skip)]
    pub sentence: SentenceRef,
    #[serde(skip)]
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub topic_id: String,
    pub sentences: Vec<SummarySentence>,
    /// Sentences joined by single spaces.
    pub text: String,
}

/// Highest score wins; exact ties go to the lower (doc_index, sent_index).
pub fn break_ties(candidates: &[(SentenceRef, f64)]) -> Option<SentenceRef> {
    candidates
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .map(|c| c.0)
}

/// Orders selections by the traversal rank of their node, then by selection
/// sequence within a node.
pub fn order_summary(
    topic: &EmbeddedTopic,
    state: &SelectionState,
    traversal_rank: &[usize],
) -> Summary {
    let mut order: Vec<(usize, &Selection)> = state.selected.iter().enumerate().collect();
    order.sort_by_key(|(seq, s)| (traversal_rank[s.node_id], *seq));
    let sentences: Vec<SummarySentence> = order
        .into_iter()
        .map(|(_, s)| {
            let doc = &topic.topic.documents[s.sentence.doc];
            let sent = &doc.sentences[s.sentence.sent];
            SummarySentence {
                text: sent.text.clone(),
                node_id: s.node_id,
                doc_id: doc.doc_id.clone(),
                position: sent.position(),
                sentence: s.sentence,
                iteration: s.iteration,
            }
        })
        .collect();
    let text = sentences
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Summary {
        topic_id: topic.topic.topic_id.clone(),
        sentences,
        text,
    }
}

struct Candidate {
    at: SentenceRef,
    cs: f64,
    position: f64,
}

/// Per-node candidate list with cached CS and position scores.
struct NodeCandidates {
    node_id: usize,
    candidates: Vec<Candidate>,
}

/// Runs the iteration loop over `tree`.
///
/// `unit_vectors` are the vectors of the clustered units (node members index
/// into it) and provide the node centroids; `eligible` lists the sentences a
/// node may contribute.
pub fn run_selection<F>(
    tree: &ClassTree,
    unit_vectors: &[EmbeddingVector],
    eligible: F,
    topic: &EmbeddedTopic,
    hp: &Hyperparams,
    budget: Budget,
    mode: ScoringMode,
) -> Result<SelectionState>
where
    F: Fn(&ClassTreeNode) -> Vec<SentenceRef>,
{
    if tree.nodes.is_empty() {
        return Err(Error::InvalidParameter("empty class tree".into()));
    }
    budget.validate()?;

    let mut nodes = Vec::with_capacity(tree.traversal_order.len());
    for &id in &tree.traversal_order {
        let node = tree.node(id);
        let centroids = node_centroids(&node.members, unit_vectors);
        let mut candidates = Vec::new();
        for at in eligible(node) {
            let doc_len = topic.topic.documents[at.doc].sentences.len();
            candidates.push(Candidate {
                at,
                cs: score_cs(topic.sentence_vector(at), &centroids, hp.delta)?,
                position: score_position(at.sent + 1, doc_len),
            });
        }
        nodes.push(NodeCandidates {
            node_id: id,
            candidates,
        });
    }

    let mut state = SelectionState::default();
    let mut taken: Vec<Vec<bool>> = topic
        .topic
        .documents
        .iter()
        .map(|d| vec![false; d.sentences.len()])
        .collect();

    let mut iteration = 1;
    loop {
        state.iteration = iteration;
        let mut progressed = false;
        for node in &nodes {
            let mut scored = Vec::new();
            for c in node
                .candidates
                .iter()
                .filter(|c| !taken[c.at.doc][c.at.sent])
            {
                let score = match mode {
                    ScoringMode::CsOnly => c.cs,
                    ScoringMode::Final => {
                        let nr = score_nr(topic.sentence_vector(c.at), &state.selected_vectors)?;
                        score_final(c.cs, nr, c.position, hp)
                    }
                };
                scored.push((c.at, score));
            }
            let Some(best) = break_ties(&scored) else {
                continue;
            };
            let score = scored.iter().find(|s| s.0 == best).map_or(0.0, |s| s.1);
            taken[best.doc][best.sent] = true;
            state.push(
                Selection {
                    sentence: best,
                    node_id: node.node_id,
                    iteration,
                    score,
                },
                topic.sentence_vector(best).clone(),
                budget.size_of(topic.topic.sentence(best)),
            );
            progressed = true;
            if state.consumed >= budget.limit {
                return Ok(state);
            }
        }
        if !progressed {
            return Ok(state);
        }
        iteration += 1;
    }
}

/// Selects a summary from a document class tree: each node offers every
/// sentence of its member documents.
pub fn select_summary(
    tree: &ClassTree,
    topic: &EmbeddedTopic,
    hp: &Hyperparams,
    budget: Budget,
    mode: ScoringMode,
) -> Result<Summary> {
    let state = run_selection(
        tree,
        &topic.document_vectors,
        |node| {
            node.members
                .iter()
                .flat_map(|&doc| {
                    (0..topic.topic.documents[doc].sentences.len())
                        .map(move |sent| SentenceRef { doc, sent })
                })
                .collect()
        },
        topic,
        hp,
        budget,
        mode,
    )?;
    Ok(order_summary(topic, &state, &tree.traversal_rank()))
}
