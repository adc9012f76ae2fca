//! Greedy agglomerative clustering on weighted modularity
//!
//! `Q_w = 1/(2 w_s) * sum_ij [w_ij - w_i w_j / (2 w_s)] * delta(c_i, c_j)`,
//!
//! used as the clustering baseline, and the cluster-aware spring rest lengths
//! derived from a cut of the hierarchy.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;
use crate::weighting::WeightedGraph;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("cluster count {k} outside 1..={max}")]
    InvalidK { k: usize, max: usize },
    #[error("cannot reach {k} clusters: the graph has {components} components")]
    TooFewClusters { k: usize, components: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Id given to the merged cluster: `node_count + merge index`.
    pub merged: usize,
    pub delta_q: f64,
    pub q_after: f64,
}

/// Merge sequence starting from singleton clusters `0..node_count`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterHierarchy {
    pub node_count: usize,
    pub initial_q: f64,
    pub merges: Vec<Merge>,
}

impl ClusterHierarchy {
    /// Cluster label per node after cutting the hierarchy at `k` clusters.
    /// Labels are numbered by first appearance in node order.
    pub fn labels(&self, k: usize) -> Result<Vec<usize>, ClusterError> {
        let n = self.node_count;
        if k == 0 || k > n.max(1) {
            return Err(ClusterError::InvalidK { k, max: n });
        }
        let components = n - self.merges.len();
        if k < components {
            return Err(ClusterError::TooFewClusters { k, components });
        }
        let mut owner: Vec<usize> = (0..n + self.merges.len()).collect();
        for merge in &self.merges[..n - k] {
            owner[merge.a] = merge.merged;
            owner[merge.b] = merge.merged;
        }
        let resolve = |mut c: usize| {
            while owner[c] != c {
                c = owner[c];
            }
            c
        };
        let mut renumber = BTreeMap::new();
        Ok((0..n)
            .map(|v| {
                let root = resolve(v);
                let next = renumber.len();
                *renumber.entry(root).or_insert(next)
            })
            .collect())
    }

    pub fn q_after(&self, merges: usize) -> f64 {
        match merges {
            0 => self.initial_q,
            m => self.merges[m - 1].q_after,
        }
    }
}

/// `Q_w` of a node labelling, evaluated literally over all node pairs.
pub fn modularity(wg: &WeightedGraph, labels: &[usize]) -> f64 {
    let graph = wg.graph();
    let n = graph.node_count();
    let mut w = vec![0.0; n * n];
    for (e, edge) in graph.edges().iter().enumerate() {
        w[edge.source * n + edge.target] += wg.weight(e);
        w[edge.target * n + edge.source] += wg.weight(e);
    }
    let two_ws: f64 = w.iter().sum();
    if two_ws == 0.0 {
        return 0.0;
    }
    let strength: Vec<f64> = (0..n).map(|i| w[i * n..(i + 1) * n].iter().sum()).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += w[i * n + j] - strength[i] * strength[j] / two_ws;
            }
        }
    }
    q / two_ws
}

/// Repeatedly merges the pair of adjacent clusters with the largest gain in
/// `Q_w` (smallest id pair on ties) until every component is one cluster.
/// `Q_w` is tracked incrementally.
pub fn greedy_modularity(wg: &WeightedGraph) -> ClusterHierarchy {
    let graph = wg.graph();
    let n = graph.node_count();
    let mut links: BTreeMap<usize, BTreeMap<usize, f64>> = (0..n).map(|v| (v, BTreeMap::new())).collect();
    let mut strength: BTreeMap<usize, f64> = (0..n).map(|v| (v, 0.0)).collect();
    for (e, edge) in graph.edges().iter().enumerate() {
        let w = wg.weight(e);
        *links.get_mut(&edge.source).unwrap().entry(edge.target).or_insert(0.0) += w;
        *links.get_mut(&edge.target).unwrap().entry(edge.source).or_insert(0.0) += w;
        *strength.get_mut(&edge.source).unwrap() += w;
        *strength.get_mut(&edge.target).unwrap() += w;
    }
    let two_ws: f64 = strength.values().sum();
    if two_ws == 0.0 {
        return ClusterHierarchy {
            node_count: n,
            initial_q: 0.0,
            merges: Vec::new(),
        };
    }

    let initial_q = -strength.values().map(|s| (s / two_ws).powi(2)).sum::<f64>();
    let mut q = initial_q;
    let mut merges = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (&a, neighbors) in &links {
            for (&b, &w_ab) in neighbors.range(a + 1..) {
                let gain = 2.0 * (w_ab / two_ws - strength[&a] * strength[&b] / (two_ws * two_ws));
                let better = match best {
                    None => true,
                    Some((g, ..)) => gain > g,
                };
                if better {
                    best = Some((gain, a, b));
                }
            }
        }
        let Some((delta_q, a, b)) = best else {
            break;
        };
        let merged = n + merges.len();
        let mut combined = BTreeMap::new();
        for old in [a, b] {
            for (c, w) in links.remove(&old).unwrap() {
                if c == a || c == b {
                    continue;
                }
                *combined.entry(c).or_insert(0.0) += w;
                let theirs = links.get_mut(&c).unwrap();
                theirs.remove(&old);
            }
        }
        for (&c, &w) in &combined {
            links.get_mut(&c).unwrap().insert(merged, w);
        }
        links.insert(merged, combined);
        let s = strength.remove(&a).unwrap() + strength.remove(&b).unwrap();
        strength.insert(merged, s);
        q += delta_q;
        merges.push(Merge {
            a,
            b,
            merged,
            delta_q,
            q_after: q,
        });
    }
    ClusterHierarchy {
        node_count: n,
        initial_q,
        merges,
    }
}

/// Spring rest length per edge: `base` inside a cluster of the `k`-cut,
/// `multiplier * base` across clusters.
pub fn cluster_rest_lengths(
    graph: &Graph,
    hierarchy: &ClusterHierarchy,
    k: usize,
    base: f64,
    multiplier: f64,
) -> Result<Vec<f64>, ClusterError> {
    let labels = hierarchy.labels(k)?;
    Ok(graph
        .edges()
        .iter()
        .map(|e| {
            if labels[e.source] == labels[e.target] {
                base
            } else {
                multiplier * base
            }
        })
        .collect())
}
