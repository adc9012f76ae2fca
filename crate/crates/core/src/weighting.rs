//! Edge weights and metric edge lengths.
//!
//! Weights measure similarity; the length of an edge is the reciprocal of its
//! weight. Unweighted graphs get Jaccard weights over k-hop ego neighborhoods.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::Graph;

/// Lower clamp for Jaccard weights so lengths stay finite.
pub const JACCARD_FLOOR: f64 = 1e-6;

/// Largest graph for which a dense [`MetricMatrix`] is built.
pub const METRIC_MATRIX_LIMIT: usize = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum WeightingError {
    #[error("unknown node index {0}")]
    UnknownNode(usize),
    #[error("hop count must be at least 1")]
    ZeroHops,
    #[error("graph already carries edge weights")]
    AlreadyWeighted,
    #[error("graph has no edge weights")]
    Unweighted,
    #[error("edge {edge} has non-positive weight {weight}")]
    NonPositiveWeight { edge: usize, weight: f64 },
    #[error("weight map has {found} entries for {expected} edges")]
    WeightCount { expected: usize, found: usize },
    #[error("metric matrix limited to {METRIC_MATRIX_LIMIT} nodes, graph has {0}")]
    TooLarge(usize),
}

pub type Result<T> = std::result::Result<T, WeightingError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightingMode {
    Jaccard,
    Given,
}

impl FromStr for WeightingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "jaccard" => Ok(WeightingMode::Jaccard),
            "given" => Ok(WeightingMode::Given),
            other => Err(format!("unknown weighting `{other}` (expected jaccard|given)")),
        }
    }
}

/// A graph together with positive weights and their reciprocal lengths,
/// both indexed like [`Graph::edges`].
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    graph: Graph,
    weights: Vec<f64>,
    lengths: Vec<f64>,
}

impl WeightedGraph {
    /// Attaches an externally computed weight map (one entry per edge).
    pub fn from_weights(graph: Graph, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != graph.edge_count() {
            return Err(WeightingError::WeightCount {
                expected: graph.edge_count(),
                found: weights.len(),
            });
        }
        if let Some((edge, &weight)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w > 0.0) || !w.is_finite())
        {
            return Err(WeightingError::NonPositiveWeight { edge, weight });
        }
        let lengths = weights.iter().map(|w| 1.0 / w).collect();
        Ok(WeightedGraph {
            graph,
            weights,
            lengths,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn weight(&self, edge: usize) -> f64 {
        self.weights[edge]
    }

    pub fn length(&self, edge: usize) -> f64 {
        self.lengths[edge]
    }
}

/// Default hop count: 1 for dense graphs (mean degree >= 4), else 2.
pub fn default_hops(graph: &Graph) -> usize {
    if graph.node_count() == 0 {
        return 1;
    }
    let mean_degree = 2.0 * graph.edge_count() as f64 / graph.node_count() as f64;
    if mean_degree >= 4.0 {
        1
    } else {
        2
    }
}

/// The node itself plus every node within `hops` edges of it.
pub fn ego_neighborhood(graph: &Graph, node: usize, hops: usize) -> Result<BTreeSet<usize>> {
    if node >= graph.node_count() {
        return Err(WeightingError::UnknownNode(node));
    }
    if hops == 0 {
        return Err(WeightingError::ZeroHops);
    }
    Ok(ego_sorted(graph, node, hops).into_iter().collect())
}

fn ego_sorted(graph: &Graph, node: usize, hops: usize) -> Vec<usize> {
    let mut seen = vec![node];
    let mut frontier = VecDeque::from([(node, 0usize)]);
    let mut marked = std::collections::HashSet::new();
    marked.insert(node);
    while let Some((v, depth)) = frontier.pop_front() {
        if depth == hops {
            continue;
        }
        for &(u, _) in graph.neighbors(v) {
            if marked.insert(u) {
                seen.push(u);
                frontier.push_back((u, depth + 1));
            }
        }
    }
    seen.sort_unstable();
    seen
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Jaccard index of the endpoints' ego neighborhoods as the weight of each
/// edge, clamped to `[JACCARD_FLOOR, 1]`.
pub fn jaccard_weights(graph: &Graph, hops: usize) -> Result<WeightedGraph> {
    if hops == 0 {
        return Err(WeightingError::ZeroHops);
    }
    if graph.is_weighted() {
        return Err(WeightingError::AlreadyWeighted);
    }
    let egos: Vec<Vec<usize>> = (0..graph.node_count())
        .into_par_iter()
        .map(|v| ego_sorted(graph, v, hops))
        .collect();
    let weights = graph
        .edges()
        .par_iter()
        .map(|e| {
            let (a, b) = (&egos[e.source], &egos[e.target]);
            let shared = sorted_intersection_len(a, b);
            let union = a.len() + b.len() - shared;
            (shared as f64 / union as f64).clamp(JACCARD_FLOOR, 1.0)
        })
        .collect();
    WeightedGraph::from_weights(graph.clone(), weights)
}

/// Uses the weights already stored on the graph's edges.
pub fn lengths_from_weights(graph: &Graph) -> Result<WeightedGraph> {
    let weights: Option<Vec<f64>> = graph.edges().iter().map(|e| e.weight).collect();
    match weights {
        Some(w) => WeightedGraph::from_weights(graph.clone(), w),
        None => Err(WeightingError::Unweighted),
    }
}

/// Picks the weighting for a graph: given weights are used as-is, Jaccard is
/// computed for unweighted graphs. `hops` defaults via [`default_hops`].
pub fn weigh(graph: &Graph, mode: WeightingMode, hops: Option<usize>) -> Result<WeightedGraph> {
    match mode {
        WeightingMode::Given => lengths_from_weights(graph),
        WeightingMode::Jaccard if graph.is_weighted() => lengths_from_weights(graph),
        WeightingMode::Jaccard => {
            jaccard_weights(graph, hops.unwrap_or_else(|| default_hops(graph)))
        }
    }
}

/// Dense all-pairs shortest-path distances under edge lengths `1/w`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricMatrix {
    size: usize,
    distances: Vec<f64>,
}

impl MetricMatrix {
    /// Builds a matrix from a full row-major table of distances.
    pub fn from_dense(size: usize, distances: Vec<f64>) -> Self {
        assert_eq!(distances.len(), size * size, "matrix must be square");
        MetricMatrix { size, distances }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.size + j]
    }

    /// Checks zero diagonal, symmetry and the triangle inequality within
    /// `tolerance` (relative to the compared distances).
    pub fn is_metric(&self, tolerance: f64) -> bool {
        let n = self.size;
        for i in 0..n {
            if self.get(i, i) != 0.0 {
                return false;
            }
            for j in 0..n {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
                for k in 0..n {
                    let direct = self.get(i, k);
                    let detour = self.get(i, j) + self.get(j, k);
                    if direct > detour + tolerance * detour.abs().max(1.0) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn dijkstra(wg: &WeightedGraph, source: usize, out: &mut [f64]) {
    let graph = wg.graph();
    out.fill(f64::INFINITY);
    out[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((OrdF64(0.0), source)));
    while let Some(Reverse((OrdF64(d), v))) = heap.pop() {
        if d > out[v] {
            continue;
        }
        for &(u, e) in graph.neighbors(v) {
            let next = d + wg.length(e);
            if next < out[u] {
                out[u] = next;
                heap.push(Reverse((OrdF64(next), u)));
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// All-pairs shortest paths via one Dijkstra run per node. Distances across
/// components are infinite.
pub fn shortest_path_metric(wg: &WeightedGraph) -> Result<MetricMatrix> {
    let n = wg.graph().node_count();
    if n > METRIC_MATRIX_LIMIT {
        return Err(WeightingError::TooLarge(n));
    }
    let mut distances = vec![0.0; n * n];
    distances
        .par_chunks_mut(n.max(1))
        .enumerate()
        .take(n)
        .for_each(|(source, row)| dijkstra(wg, source, row));
    // Dijkstra sums paths in different orders from either end; take the
    // smaller value so the matrix is exactly symmetric.
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distances[i * n + j].min(distances[j * n + i]);
            distances[i * n + j] = d;
            distances[j * n + i] = d;
        }
    }
    Ok(MetricMatrix { size: n, distances })
}
