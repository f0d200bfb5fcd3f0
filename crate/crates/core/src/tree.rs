//! Top-down construction of the class tree with seeded k-means.
//!
//! The root holds every unit (documents for the main method, sentences for
//! the sentence-clustering variant). Each layer splits the nodes of the
//! previous one with k-means until no node of the newest layer can be split,
//! or the node count reaches `max_nodes`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embedding::seeded_hash;
use crate::error::{Error, Result};

/// Re-seeding attempts made when Lloyd's algorithm ends with an empty cluster.
const REPAIR_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster index in `[0, k)` for every input point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

impl KMeansResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KMeansOutcome {
    Split(KMeansResult),
    /// Fewer distinct points than clusters, or every attempt left a cluster empty.
    NotDivisible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            restarts: 3,
            max_iters: 300,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn distinct_count<V: AsRef<[f64]>>(points: &[V]) -> usize {
    points
        .iter()
        .map(|p| p.as_ref().iter().map(|x| x.to_bits()).collect::<Vec<_>>())
        .collect::<HashSet<_>>()
        .len()
}

/// Sum of squared distances of each point to the mean of its cluster.
pub fn partition_inertia<V: AsRef<[f64]>>(points: &[V], assignments: &[usize], k: usize) -> f64 {
    let centroids = cluster_means(points, assignments, k);
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| match &centroids[a] {
            Some(c) => sq_dist(p.as_ref(), c),
            None => 0.0,
        })
        .sum()
}

fn cluster_means<V: AsRef<[f64]>>(
    points: &[V],
    assignments: &[usize],
    k: usize,
) -> Vec<Option<Vec<f64>>> {
    let dim = points[0].as_ref().len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p.as_ref()) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|x| x / n as f64).collect()))
        .collect()
}

/// Seeded k-means: greedy k-means++ initialisation followed by Lloyd
/// iterations, keeping the lowest-inertia run over `restarts`. Deterministic
/// for fixed inputs and parameters.
pub fn kmeans<V: AsRef<[f64]>>(points: &[V], params: KMeansParams) -> Result<KMeansOutcome> {
    let k = params.k;
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k-means needs k >= 2, got {k}"
        )));
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter("k-means over zero points".into()));
    }
    let dim = points[0].as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.as_ref().len(),
        });
    }
    if distinct_count(points) < k {
        return Ok(KMeansOutcome::NotDivisible);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..params.restarts.max(1) {
        let run = (0..=REPAIR_ATTEMPTS).find_map(|_| {
            let init = kmeans_plus_plus(points, k, &mut rng);
            lloyd(points, init, params.max_iters)
        });
        if let Some(run) = run {
            if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                best = Some(run);
            }
        }
    }
    Ok(best.map_or(KMeansOutcome::NotDivisible, KMeansOutcome::Split))
}

/// Greedy k-means++: each new centre is the best of `2 + ln k` candidates
/// drawn proportionally to squared distance from the current centres.
fn kmeans_plus_plus<V: AsRef<[f64]>>(
    points: &[V],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let first = rng.random_range(0..n);
    let mut centres = vec![points[first].as_ref().to_vec()];
    let mut closest: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p.as_ref(), &centres[0]))
        .collect();

    while centres.len() < k {
        let total: f64 = closest.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut best_candidate = None;
        let mut best_potential = f64::INFINITY;
        let mut best_closest = Vec::new();
        for _ in 0..trials {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in closest.iter().enumerate() {
                if *d <= 0.0 {
                    continue;
                }
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if closest[pick] <= 0.0 {
                // floating-point drift past the end; take the last positive
                pick = closest.iter().rposition(|d| *d > 0.0).unwrap_or(pick);
            }
            let candidate = points[pick].as_ref();
            let updated: Vec<f64> = points
                .iter()
                .zip(&closest)
                .map(|(p, d)| d.min(sq_dist(p.as_ref(), candidate)))
                .collect();
            let potential: f64 = updated.iter().sum();
            if potential < best_potential {
                best_potential = potential;
                best_candidate = Some(pick);
                best_closest = updated;
            }
        }
        match best_candidate {
            Some(pick) => {
                centres.push(points[pick].as_ref().to_vec());
                closest = best_closest;
            }
            None => break,
        }
    }
    centres
}

fn nearest(point: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centres.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Lloyd iterations from the given centres. Clusters that empty out are
/// refilled with the point farthest from its centre. Returns `None` when a
/// cluster is still empty at the end.
fn lloyd<V: AsRef<[f64]>>(
    points: &[V],
    mut centres: Vec<Vec<f64>>,
    max_iters: usize,
) -> Option<KMeansResult> {
    let k = centres.len();
    let n = points.len();
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..max_iters.max(1) {
        let mut dists = vec![0.0; n];
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p.as_ref(), &centres);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
            dists[i] = d;
        }
        repair_empty(&mut assignments, &mut dists, k);
        let means = cluster_means(points, &assignments, k);
        for (c, m) in centres.iter_mut().zip(means) {
            if let Some(m) = m {
                *c = m;
            }
        }
        if !changed {
            break;
        }
    }
    let means = cluster_means(points, &assignments, k);
    if means.iter().any(Option::is_none) {
        return None;
    }
    let centroids: Vec<Vec<f64>> = means.into_iter().flatten().collect();
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p.as_ref(), &centroids[a]))
        .sum();
    Some(KMeansResult {
        assignments,
        centroids,
        inertia,
    })
}

fn repair_empty(assignments: &mut [usize], dists: &mut [f64], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..assignments.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        let Some(i) = donor else {
            return;
        };
        assignments[i] = empty;
        dists[i] = 0.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeParams {
    /// Clusters per split when building the second layer.
    pub k_first: usize,
    /// Clusters per split for the third layer and below.
    pub k_rest: usize,
    /// Construction stops once the tree holds at least this many nodes.
    pub max_nodes: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl TreeParams {
    pub fn new(k_first: usize, max_nodes: usize, seed: u64) -> Self {
        TreeParams {
            k_first,
            k_rest: 2,
            max_nodes,
            seed,
            restarts: 3,
            max_iters: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassTreeNode {
    pub node_id: usize,
    /// 1 for the root.
    pub layer: usize,
    /// Indices of the clustered units, ascending.
    pub members: Vec<usize>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

impl ClassTreeNode {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    fn first_member(&self) -> usize {
        self.members[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassTree {
    /// Arena of nodes; `nodes[i].node_id == i` and the root is node 0.
    pub nodes: Vec<ClassTreeNode>,
    /// Node ids ordered by layer, then size descending, then smallest member.
    pub traversal_order: Vec<usize>,
}

impl ClassTree {
    pub fn root(&self) -> &ClassTreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &ClassTreeNode {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.layer).max().unwrap_or(0)
    }

    /// Rank of each node in the traversal order, indexed by node id.
    pub fn traversal_rank(&self) -> Vec<usize> {
        let mut rank = vec![0; self.nodes.len()];
        for (i, &id) in self.traversal_order.iter().enumerate() {
            rank[id] = i;
        }
        rank
    }

    /// A tree holding only the given root members.
    pub fn single(n: usize) -> Self {
        ClassTree {
            nodes: vec![ClassTreeNode {
                node_id: 0,
                layer: 1,
                members: (0..n).collect(),
                children: Vec::new(),
                parent: None,
            }],
            traversal_order: vec![0],
        }
    }
}

fn node_order(a: &ClassTreeNode, b: &ClassTreeNode) -> std::cmp::Ordering {
    a.layer
        .cmp(&b.layer)
        .then(b.size().cmp(&a.size()))
        .then(a.first_member().cmp(&b.first_member()))
}

fn split_seed(seed: u64, node_id: usize) -> u64 {
    seeded_hash(&(node_id as u64).to_le_bytes(), seed)
}

/// Builds the class tree over `points` (one per clustered unit).
///
/// A node cannot be divided when it has fewer than two members, fewer
/// distinct vectors than `k`, or k-means keeps leaving a cluster empty.
/// Construction stops when a new layer produces no nodes, or before
/// splitting any further node once the tree holds `max_nodes` nodes; the
/// split that reaches the bound is kept, so the tree never exceeds
/// `max_nodes + k - 1` nodes.
pub fn build_class_tree<V: AsRef<[f64]>>(points: &[V], params: TreeParams) -> Result<ClassTree> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("class tree over zero units".into()));
    }
    if params.k_first < 2 || params.k_rest < 2 {
        return Err(Error::InvalidParameter(format!(
            "k_first and k_rest must be at least 2 (got {}, {})",
            params.k_first, params.k_rest
        )));
    }
    if params.max_nodes < 1 {
        return Err(Error::InvalidParameter(
            "max_nodes must be at least 1".into(),
        ));
    }

    let mut tree = ClassTree::single(points.len());
    let mut latest = vec![0usize];
    let mut layer = 1;
    'layers: while tree.nodes.len() < params.max_nodes {
        let k = if layer == 1 {
            params.k_first
        } else {
            params.k_rest
        };
        latest.sort_by(|&a, &b| node_order(&tree.nodes[a], &tree.nodes[b]));
        let mut next = Vec::new();
        let mut bound_hit = false;
        for &parent in &latest {
            if tree.nodes.len() >= params.max_nodes {
                bound_hit = true;
                break;
            }
            let members = tree.nodes[parent].members.clone();
            if members.len() < 2 {
                continue;
            }
            let subset: Vec<&[f64]> = members.iter().map(|&m| points[m].as_ref()).collect();
            let km = kmeans(
                &subset,
                KMeansParams {
                    k,
                    seed: split_seed(params.seed, parent),
                    restarts: params.restarts,
                    max_iters: params.max_iters,
                },
            )?;
            let KMeansOutcome::Split(result) = km else {
                continue;
            };
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (&m, &a) in members.iter().zip(&result.assignments) {
                groups[a].push(m);
            }
            groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
            for group in groups {
                let id = tree.nodes.len();
                tree.nodes.push(ClassTreeNode {
                    node_id: id,
                    layer: layer + 1,
                    members: group,
                    children: Vec::new(),
                    parent: Some(parent),
                });
                tree.nodes[parent].children.push(id);
                next.push(id);
            }
        }
        if next.is_empty() || bound_hit {
            break 'layers;
        }
        latest = next;
        layer += 1;
    }

    let mut order: Vec<usize> = (0..tree.nodes.len()).collect();
    order.sort_by(|&a, &b| node_order(&tree.nodes[a], &tree.nodes[b]));
    tree.traversal_order = order;
    Ok(tree)
}

/// Approximate number of sentences a summary needs: target summary length
/// divided by mean source sentence length, both in the same unit.
pub fn estimate_sentence_budget(avg_target_length: f64, avg_sentence_length: f64) -> Result<f64> {
    if !(avg_target_length > 0.0 && avg_sentence_length > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sentence budget needs positive lengths, got {avg_target_length} and {avg_sentence_length}"
        )));
    }
    Ok(avg_target_length / avg_sentence_length)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[[f64; 2]]) -> Vec<Vec<f64>> {
        raw.iter().map(|p| p.to_vec()).collect()
    }

    /// Minimum within-cluster sum of squares over every assignment that uses
    /// all k labels.
    fn brute_force_inertia(points: &[Vec<f64>], k: usize) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        let mut labels = vec![0usize; n];
        loop {
            let mut used = vec![false; k];
            labels.iter().for_each(|&l| used[l] = true);
            if used.iter().all(|&u| u) {
                best = best.min(partition_inertia(points, &labels, k));
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                labels[i] += 1;
                if labels[i] < k {
                    break;
                }
                labels[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn separates_two_obvious_groups() {
        let p = pts(&[[0.0, 0.0], [0.0, 0.1], [10.0, 10.0], [10.0, 10.1]]);
        let KMeansOutcome::Split(r) = kmeans(&p, KMeansParams::new(2, 1)).unwrap() else {
            panic!("expected a split");
        };
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        assert!((r.inertia - brute_force_inertia(&p, 2)).abs() < 1e-12);
        assert!((r.inertia - 0.01).abs() < 1e-12);
    }

    #[test]
    fn identical_points_are_not_divisible() {
        let p = pts(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(
            kmeans(&p, KMeansParams::new(2, 0)).unwrap(),
            KMeansOutcome::NotDivisible
        );
    }

    #[test]
    fn two_points_two_clusters() {
        let p = pts(&[[0.0, 1.0], [3.0, 4.0]]);
        let KMeansOutcome::Split(r) = kmeans(&p, KMeansParams::new(2, 5)).unwrap() else {
            panic!("expected a split");
        };
        assert_ne!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn kmeans_rejects_bad_input() {
        let p = pts(&[[0.0, 1.0]]);
        assert!(kmeans(&p, KMeansParams::new(1, 0)).is_err());
        assert!(kmeans::<Vec<f64>>(&[], KMeansParams::new(2, 0)).is_err());
        let ragged = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(
            kmeans(&ragged, KMeansParams::new(2, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn repair_fills_empty_cluster() {
        // Two coincident centres would leave cluster 1 empty.
        let p = pts(&[[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]]);
        let r = lloyd(&p, vec![vec![0.0, 0.0], vec![0.0, 0.0]], 10).unwrap();
        assert_eq!(r.cluster_sizes().iter().filter(|&&s| s == 0).count(), 0);
    }

    #[test]
    fn single_document_tree_is_root_only() {
        let t = build_class_tree(&pts(&[[1.0, 0.0]]), TreeParams::new(3, 100, 0)).unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.traversal_order, vec![0]);
    }

    #[test]
    fn max_nodes_one_is_root_only() {
        let p = pts(&[[0.0, 0.0], [5.0, 5.0], [9.0, 0.0]]);
        let t = build_class_tree(&p, TreeParams::new(2, 1, 0)).unwrap();
        assert_eq!(t.node_count(), 1);
    }

    #[test]
    fn three_separated_pairs_give_ten_nodes() {
        let p = pts(&[
            [0.0, 0.0],
            [0.0, 1.0],
            [50.0, 0.0],
            [50.0, 1.0],
            [0.0, 50.0],
            [1.0, 50.0],
        ]);
        let t = build_class_tree(&p, TreeParams::new(3, 100, 3)).unwrap();
        assert_eq!(t.node_count(), 10);
        let layer2: Vec<_> = t.nodes.iter().filter(|n| n.layer == 2).collect();
        assert_eq!(layer2.len(), 3);
        let mut groups: Vec<Vec<usize>> = layer2.iter().map(|n| n.members.clone()).collect();
        groups.sort();
        assert_eq!(groups, vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        assert!(t
            .nodes
            .iter()
            .filter(|n| n.layer == 3)
            .all(|n| n.size() == 1));
        // traversal: root, then the pairs by smallest member, then singletons
        assert_eq!(t.node(t.traversal_order[1]).members, vec![0, 1]);
        assert_eq!(t.node(t.traversal_order[2]).members, vec![2, 3]);
        assert_eq!(t.node(t.traversal_order[4]).members, vec![0]);
    }

    #[test]
    fn bound_stops_mid_layer() {
        let p = pts(&[
            [0.0, 0.0],
            [0.0, 1.0],
            [50.0, 0.0],
            [50.0, 1.0],
            [0.0, 50.0],
            [1.0, 50.0],
        ]);
        let t = build_class_tree(&p, TreeParams::new(3, 5, 3)).unwrap();
        // root + 3 pairs = 4 < 5, one pair splits (+2) and the bound is reached
        assert_eq!(t.node_count(), 6);
    }

    #[test]
    fn budget_estimates() {
        assert!((estimate_sentence_budget(100.0, 25.0).unwrap() - 4.0).abs() < 1e-12);
        // 665-byte summaries are about 118 words; sentences average 25.38 words
        assert!((estimate_sentence_budget(118.0, 25.38).unwrap() - 4.65).abs() < 0.005);
        assert!((estimate_sentence_budget(100.0, 25.43).unwrap() - 3.93).abs() < 0.005);
        assert!((estimate_sentence_budget(100.0, 22.86).unwrap() - 4.37).abs() < 0.005);
        assert!(estimate_sentence_budget(0.0, 25.0).is_err());
        assert!(estimate_sentence_budget(10.0, -1.0).is_err());
    }
}
