//! The main method and its ablation baselines behind one entry point.
//!
//! * `comp1`: no clustering, rank sentences by similarity to the centroid of
//!   all documents.
//! * `comp2`: flat k-means over documents, CS score within each cluster,
//!   round-robin over clusters in size order.
//! * `comp3`: as `comp2`, scored by similarity to the cluster centroid only.
//! * `comp4`: the class tree built over sentences instead of documents,
//!   scored by the CS score alone.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRef;
use crate::embedding::{cosine_similarity, EmbeddedTopic, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scoring::Hyperparams;
use crate::selection::{
    order_summary, run_selection, select_summary, Budget, BudgetUnit, ScoringMode, Selection,
    SelectionState, Summary,
};
use crate::tree::{
    build_class_tree, estimate_sentence_budget, kmeans, ClassTree, ClassTreeNode, KMeansOutcome,
    KMeansParams, TreeParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    OursFinal,
    OursCs,
    Comp1,
    Comp2,
    Comp3,
    Comp4,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::OursCs,
        Method::OursFinal,
        Method::Comp1,
        Method::Comp2,
        Method::Comp3,
        Method::Comp4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::OursFinal => "ours-final",
            Method::OursCs => "ours-cs",
            Method::Comp1 => "comp1",
            Method::Comp2 => "comp2",
            Method::Comp3 => "comp3",
            Method::Comp4 => "comp4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub method: Method,
    pub hp: Hyperparams,
    pub budget: Budget,
    pub seed: u64,
    /// Node bound for class trees; derived from the budget when `None`.
    pub max_nodes: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
}

impl VariantSpec {
    pub fn new(method: Method, hp: Hyperparams, budget: Budget, seed: u64) -> Self {
        VariantSpec {
            method,
            hp,
            budget,
            seed,
            max_nodes: None,
            restarts: 3,
            max_iters: 300,
        }
    }

    /// Hyperparameters actually used: `ours-cs` scores with the CS score alone.
    pub fn effective_hp(&self) -> Hyperparams {
        match self.method {
            Method::OursCs | Method::Comp4 => self.hp.cs_only(),
            _ => self.hp,
        }
    }

    /// Node bound for `topic`: the explicit bound, or the ceiling of the
    /// estimated number of sentences that fill the budget.
    pub fn max_nodes_for(&self, topic: &EmbeddedTopic) -> Result<usize> {
        if let Some(n) = self.max_nodes {
            return Ok(n);
        }
        let mean = match self.budget.unit {
            BudgetUnit::Words => topic.topic.mean_sentence_words(),
            BudgetUnit::Bytes => topic.topic.mean_sentence_bytes(),
        };
        let estimate = estimate_sentence_budget(self.budget.limit as f64, mean)?;
        Ok((estimate.ceil() as usize).max(1))
    }

    pub fn tree_params(&self, topic: &EmbeddedTopic) -> Result<TreeParams> {
        Ok(TreeParams {
            k_first: self.hp.k_first,
            k_rest: self.hp.k_rest,
            max_nodes: self.max_nodes_for(topic)?,
            seed: self.seed,
            restarts: self.restarts,
            max_iters: self.max_iters,
        })
    }
}

#[derive(Debug, Clone)]
pub struct VariantOutput {
    pub summary: Summary,
    /// The tree (or flat clustering) that drove selection, when there is one.
    pub tree: Option<ClassTree>,
}

/// Summarizes one topic with the method named in `spec`.
pub fn summarize_topic(topic: &EmbeddedTopic, spec: &VariantSpec) -> Result<VariantOutput> {
    spec.budget.validate()?;
    let hp = spec.effective_hp();
    hp.validate()?;
    match spec.method {
        Method::OursFinal | Method::OursCs => {
            let tree = build_class_tree(&topic.document_vectors, spec.tree_params(topic)?)?;
            let mode = if spec.method == Method::OursCs {
                ScoringMode::CsOnly
            } else {
                ScoringMode::Final
            };
            let summary = select_summary(&tree, topic, &hp, spec.budget, mode)?;
            Ok(VariantOutput {
                summary,
                tree: Some(tree),
            })
        }
        Method::Comp1 => Ok(VariantOutput {
            summary: summarize_comp1(topic, spec.budget)?,
            tree: None,
        }),
        Method::Comp2 | Method::Comp3 => {
            let tree = flat_clusters(topic, hp.k_first, spec)?;
            let hp = if spec.method == Method::Comp3 {
                Hyperparams { delta: 1.0, ..hp }
            } else {
                hp
            };
            let summary = select_summary(&tree, topic, &hp, spec.budget, ScoringMode::CsOnly)?;
            Ok(VariantOutput {
                summary,
                tree: Some(tree),
            })
        }
        Method::Comp4 => {
            let (tree, summary) = summarize_comp4(topic, &hp, spec)?;
            Ok(VariantOutput {
                summary,
                tree: Some(tree),
            })
        }
    }
}

/// Ranks every sentence by cosine similarity to the centroid of all
/// documents and takes them greedily, skipping repeated sentence texts.
pub fn summarize_comp1(topic: &EmbeddedTopic, budget: Budget) -> Result<Summary> {
    budget.validate()?;
    let centroid = EmbeddingVector::mean(&topic.document_vectors);
    let mut ranked: Vec<(SentenceRef, f64)> = topic
        .topic
        .sentence_refs()
        .map(|at| Ok((at, cosine_similarity(topic.sentence_vector(at), &centroid)?)))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut state = SelectionState::default();
    let mut texts: Vec<&str> = Vec::new();
    for (at, score) in ranked {
        let sentence = topic.topic.sentence(at);
        if texts.contains(&sentence.text.as_str()) {
            continue;
        }
        texts.push(&sentence.text);
        state.push(
            Selection {
                sentence: at,
                node_id: 0,
                iteration: 1,
                score,
            },
            topic.sentence_vector(at).clone(),
            budget.size_of(sentence),
        );
        if state.consumed >= budget.limit {
            break;
        }
    }
    Ok(order_summary(topic, &state, &[0]))
}

/// One layer of k-means over documents, exposed as a tree whose traversal
/// skips the root so selection cycles through the clusters only. Falls back
/// to a single all-document cluster when the documents cannot be divided.
fn flat_clusters(topic: &EmbeddedTopic, k: usize, spec: &VariantSpec) -> Result<ClassTree> {
    let n = topic.document_vectors.len();
    let mut tree = ClassTree::single(n);
    if n < 2 {
        return Ok(tree);
    }
    let outcome = kmeans(
        &topic.document_vectors,
        KMeansParams {
            k,
            seed: spec.seed,
            restarts: spec.restarts,
            max_iters: spec.max_iters,
        },
    )?;
    let KMeansOutcome::Split(result) = outcome else {
        return Ok(tree);
    };
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (doc, &c) in result.assignments.iter().enumerate() {
        groups[c].push(doc);
    }
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    for group in groups {
        let id = tree.nodes.len();
        tree.nodes.push(ClassTreeNode {
            node_id: id,
            layer: 2,
            members: group,
            children: Vec::new(),
            parent: Some(0),
        });
        tree.nodes[0].children.push(id);
    }
    tree.traversal_order = (1..tree.nodes.len()).collect();
    Ok(tree)
}

/// The main pipeline with sentences, not documents, as the clustered units.
fn summarize_comp4(
    topic: &EmbeddedTopic,
    hp: &Hyperparams,
    spec: &VariantSpec,
) -> Result<(ClassTree, Summary)> {
    let refs: Vec<SentenceRef> = topic.topic.sentence_refs().collect();
    let vectors: Vec<EmbeddingVector> = refs
        .iter()
        .map(|&at| topic.sentence_vector(at).clone())
        .collect();
    let tree = build_class_tree(&vectors, spec.tree_params(topic)?)?;
    let state = run_selection(
        &tree,
        &vectors,
        |node| node.members.iter().map(|&m| refs[m]).collect(),
        topic,
        hp,
        spec.budget,
        ScoringMode::CsOnly,
    )?;
    let summary = order_summary(topic, &state, &tree.traversal_rank());
    Ok((tree, summary))
}
