//! Sentence scores used during selection.
//!
//! * commonality-specificity: closeness to the centroid of the node's
//!   documents and distance from the centroid of the remaining documents;
//! * non-redundancy: distance from the closest already-selected sentence;
//! * position: decays with the sentence's position, floored at 0.5;
//! * final: a convex combination of the three.
//!
//! Cosines are clamped to `[0, 1]` before use so that every score stays in
//! `[0, 1]` whatever the embedding provider returns.

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, EmbeddingVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Weight of commonality versus specificity in the CS score.
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k_first: usize,
    pub k_rest: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            delta: 0.9,
            alpha: 0.8,
            beta: 0.1,
            gamma: 0.1,
            k_first: 3,
            k_rest: 2,
        }
    }
}

impl Hyperparams {
    /// Same clustering and delta, but scoring by the CS score alone.
    pub fn cs_only(self) -> Self {
        Hyperparams {
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "alpha + beta + gamma must equal 1, got {sum}"
            )));
        }
        if self.k_first < 2 || self.k_rest < 2 {
            return Err(Error::InvalidParameter(
                "k_first and k_rest must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeCentroids {
    pub inside: EmbeddingVector,
    /// `None` when the node holds every unit.
    pub outside: Option<EmbeddingVector>,
}

/// Mean of the member vectors and mean of all other vectors.
pub fn node_centroids(members: &[usize], vectors: &[EmbeddingVector]) -> NodeCentroids {
    let mut is_member = vec![false; vectors.len()];
    for &m in members {
        is_member[m] = true;
    }
    let inside = EmbeddingVector::mean(members.iter().map(|&m| &vectors[m]));
    let rest: Vec<&EmbeddingVector> = vectors
        .iter()
        .zip(&is_member)
        .filter(|(_, &m)| !m)
        .map(|(v, _)| v)
        .collect();
    let outside = (!rest.is_empty()).then(|| EmbeddingVector::mean(rest));
    NodeCentroids { inside, outside }
}

fn clamped_sim(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    Ok(cosine_similarity(a, b)?.clamp(0.0, 1.0))
}

/// `delta * sim(s, inside) + (1 - delta) * (1 - sim(s, outside))`, where a
/// missing outside centroid contributes the constant `1 - delta`.
pub fn score_cs(sentence: &EmbeddingVector, centroids: &NodeCentroids, delta: f64) -> Result<f64> {
    let inside = clamped_sim(sentence, &centroids.inside)?;
    let outside = match &centroids.outside {
        Some(c) => clamped_sim(sentence, c)?,
        None => 0.0,
    };
    Ok((delta * inside + (1.0 - delta) * (1.0 - outside)).clamp(0.0, 1.0))
}

/// One minus the highest similarity to an already-selected sentence; 1 when
/// nothing has been selected yet.
pub fn score_nr<'a, I>(sentence: &EmbeddingVector, selected: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a EmbeddingVector>,
{
    let mut max_sim = 0.0f64;
    for s in selected {
        max_sim = max_sim.max(clamped_sim(sentence, s)?);
    }
    Ok(1.0 - max_sim)
}

/// `max(0.5, exp(-position / cbrt(doc_sentence_count)))` with a 1-based position.
pub fn score_position(position: usize, doc_sentence_count: usize) -> f64 {
    let p = position.max(1) as f64;
    let n = doc_sentence_count.max(1) as f64;
    (-p / n.cbrt()).exp().max(0.5)
}

pub fn score_final(cs: f64, nr: f64, pos: f64, hp: &Hyperparams) -> f64 {
    (hp.alpha * cs + hp.beta * nr + hp.gamma * pos).clamp(0.0, 1.0)
}
