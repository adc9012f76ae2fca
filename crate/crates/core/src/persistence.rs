//! 0-dimensional persistence barcode of a weighted graph.
//!
//! Edges are scanned by increasing length `1/w`; each edge joining two
//! components is a minimum spanning tree edge and kills one component,
//! producing a bar born at 0 that dies at the edge length. The display
//! measure of a bar is the edge weight `w` itself, so strongly weighted
//! merges show up as long bars.

use std::cmp::Ordering;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::weighting::{MetricMatrix, WeightedGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PersistenceError {
    #[error("unknown bar id {0}")]
    UnknownBar(usize),
}

/// Disjoint-set forest with union by size and path halving.
#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn size_of(&mut self, x: usize) -> usize {
        let root = self.find(x);
        self.size[root]
    }

    /// Merges the sets holding `a` and `b`. Returns `(dying_root,
    /// surviving_root)` where the dying root belonged to the smaller set
    /// (`a`'s on ties), or `None` when they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<(usize, usize)> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (dying, surviving) = if self.size[ra] <= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[dying] = surviving;
        self.size[surviving] += self.size[dying];
        Some((dying, surviving))
    }
}

/// One finite feature of the barcode, tied to a minimum spanning tree edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Bar {
    pub id: usize,
    pub birth: f64,
    /// Filtration value at which the component dies: the edge length `1/w`.
    pub death_length: f64,
    /// Display measure: the edge weight `w`.
    pub persistence_measure: f64,
    /// Endpoint inside the component that died.
    pub cause_u: usize,
    /// Endpoint inside the component that survived.
    pub cause_v: usize,
    /// Index of the causing edge in the graph.
    pub edge: usize,
    pub component_id: usize,
    /// `(min, max)` of the node counts on either side of the tree edge.
    pub subset_ratio: (usize, usize),
}

impl Bar {
    /// `min / max` of the subset ratio; 1 for an even split.
    pub fn balance(&self) -> f64 {
        self.subset_ratio.0 as f64 / self.subset_ratio.1 as f64
    }
}

/// The two node sets obtained by cutting a bar's tree edge. Both are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BarSubsets {
    pub subset_u: Vec<usize>,
    pub subset_v: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Barcode {
    bars: Vec<Bar>,
    component_count: usize,
    components: Vec<Vec<usize>>,
    tree: Vec<Vec<(usize, usize)>>,
    subsets: Vec<OnceLock<BarSubsets>>,
}

impl Barcode {
    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn bar(&self, id: usize) -> Result<&Bar, PersistenceError> {
        self.bars.get(id).ok_or(PersistenceError::UnknownBar(id))
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// Number of connected components, i.e. of infinite bars.
    pub fn component_count(&self) -> usize {
        self.component_count
    }

    /// Node blocks of each connected component, indexed by `component_id`.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Graph edge indices forming the minimum spanning forest, in bar order.
    pub fn mst_edges(&self) -> Vec<usize> {
        self.bars.iter().map(|b| b.edge).collect()
    }

    pub fn max_persistence(&self) -> f64 {
        self.bars
            .iter()
            .map(|b| b.persistence_measure)
            .fold(0.0, f64::max)
    }

    /// Node subsets on either side of the bar's tree edge, computed on first
    /// request and cached.
    pub fn subsets(&self, id: usize) -> Result<&BarSubsets, PersistenceError> {
        let bar = self.bar(id)?;
        Ok(self.subsets[id].get_or_init(|| self.split(bar)))
    }

    fn split(&self, bar: &Bar) -> BarSubsets {
        let mut on_u_side = vec![bar.cause_u];
        let mut visited = std::collections::HashSet::from([bar.cause_u]);
        let mut head = 0;
        while head < on_u_side.len() {
            let v = on_u_side[head];
            head += 1;
            for &(u, through) in &self.tree[v] {
                if through != bar.id && visited.insert(u) {
                    on_u_side.push(u);
                }
            }
        }
        on_u_side.sort_unstable();
        let subset_v = self.components[bar.component_id]
            .iter()
            .copied()
            .filter(|v| on_u_side.binary_search(v).is_err())
            .collect();
        BarSubsets {
            subset_u: on_u_side,
            subset_v,
        }
    }

    /// Per-node side assignment for a bar: `Some(true)` for `subset_u`,
    /// `Some(false)` for `subset_v`, `None` outside the bar's component.
    pub fn membership(&self, id: usize, node_count: usize) -> Result<Vec<Option<bool>>, PersistenceError> {
        let subsets = self.subsets(id)?;
        let mut side = vec![None; node_count];
        for &v in &subsets.subset_u {
            side[v] = Some(true);
        }
        for &v in &subsets.subset_v {
            side[v] = Some(false);
        }
        Ok(side)
    }

    /// Display order, bottom first: persistence ascending, then more
    /// balanced splits lower, then bar id.
    pub fn sorted_ids(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.bars.len()).collect();
        order.sort_by(|&a, &b| display_cmp(&self.bars[a], &self.bars[b]));
        order
    }

    pub fn export(&self, graph: &Graph) -> BarcodeExport {
        BarcodeExport {
            bars: self
                .sorted_ids()
                .into_iter()
                .map(|id| {
                    let bar = &self.bars[id];
                    ExportedBar {
                        id,
                        persistence: bar.persistence_measure,
                        cause: [
                            graph.node_id(bar.cause_u).to_string(),
                            graph.node_id(bar.cause_v).to_string(),
                        ],
                        ratio: [bar.subset_ratio.0, bar.subset_ratio.1],
                    }
                })
                .collect(),
            components: self.component_count,
        }
    }
}

fn display_cmp(a: &Bar, b: &Bar) -> Ordering {
    a.persistence_measure
        .total_cmp(&b.persistence_measure)
        .then_with(|| {
            // Higher min/max first; compare by cross-multiplying the counts.
            let lhs = b.subset_ratio.0 * a.subset_ratio.1;
            let rhs = a.subset_ratio.0 * b.subset_ratio.1;
            lhs.cmp(&rhs)
        })
        .then_with(|| a.id.cmp(&b.id))
}

/// Barcode export, bars listed bottom first.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BarcodeExport {
    pub bars: Vec<ExportedBar>,
    pub components: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExportedBar {
    pub id: usize,
    pub persistence: f64,
    pub cause: [String; 2],
    pub ratio: [usize; 2],
}

/// Kruskal scan over edges by increasing length, emitting one bar per
/// spanning-forest edge. Equal lengths keep graph edge order.
pub fn compute_barcode(wg: &WeightedGraph) -> Barcode {
    let graph = wg.graph();
    let n = graph.node_count();
    let mut order: Vec<usize> = (0..graph.edge_count()).collect();
    order.sort_by(|&a, &b| wg.length(a).total_cmp(&wg.length(b)));

    let mut forest = DisjointSet::new(n);
    let mut tree = vec![Vec::new(); n];
    let mut bars = Vec::with_capacity(n.saturating_sub(1));
    for e in order {
        let edge = &graph.edges()[e];
        let source_root = forest.find(edge.source);
        let Some((dying, _)) = forest.union(edge.source, edge.target) else {
            continue;
        };
        let (cause_u, cause_v) = if dying == source_root {
            (edge.source, edge.target)
        } else {
            (edge.target, edge.source)
        };
        let id = bars.len();
        tree[edge.source].push((edge.target, id));
        tree[edge.target].push((edge.source, id));
        bars.push(Bar {
            id,
            birth: 0.0,
            death_length: wg.length(e),
            persistence_measure: wg.weight(e),
            cause_u,
            cause_v,
            edge: e,
            component_id: 0,
            subset_ratio: (0, 0),
        });
    }

    let components = graph.connected_components();
    let mut component_of = vec![0; n];
    for (c, block) in components.iter().enumerate() {
        for &v in block {
            component_of[v] = c;
        }
    }
    let subtree = subtree_sizes(&tree, &components);
    for bar in &mut bars {
        bar.component_id = component_of[bar.cause_u];
        let comp_size = components[bar.component_id].len();
        let (a, b) = (bar.cause_u, bar.cause_v);
        // The child endpoint is the one whose subtree excludes the other.
        let child_size = if subtree.parent[a] == Some(b) {
            subtree.size[a]
        } else {
            subtree.size[b]
        };
        let other = comp_size - child_size;
        bar.subset_ratio = (child_size.min(other), child_size.max(other));
    }

    let subsets = (0..bars.len()).map(|_| OnceLock::new()).collect();
    Barcode {
        bars,
        component_count: components.len(),
        components,
        tree,
        subsets,
    }
}

struct SubtreeSizes {
    parent: Vec<Option<usize>>,
    size: Vec<usize>,
}

fn subtree_sizes(tree: &[Vec<(usize, usize)>], components: &[Vec<usize>]) -> SubtreeSizes {
    let n = tree.len();
    let mut parent = vec![None; n];
    let mut size = vec![1; n];
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for block in components {
        let root = block[0];
        visited[root] = true;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(u, _) in &tree[v] {
                if !visited[u] {
                    visited[u] = true;
                    parent[u] = Some(v);
                    stack.push(u);
                }
            }
        }
    }
    for &v in order.iter().rev() {
        if let Some(p) = parent[v] {
            size[p] += size[v];
        }
    }
    SubtreeSizes { parent, size }
}

/// Death values of the union-of-balls filtration over a finite metric,
/// found by sweeping every pairwise distance and recounting the components
/// of the threshold graph from scratch. Sorted ascending.
///
/// Meant as an independent check on [`compute_barcode`]; cost grows like
/// the fourth power of the point count.
pub fn brute_force_barcode(metric: &MetricMatrix) -> Vec<f64> {
    let n = metric.size();
    let mut thresholds: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| metric.get(i, j))
        .filter(|d| d.is_finite())
        .collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let count_components = |t: f64| {
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for u in 0..n {
                    if !seen[u] && metric.get(v, u) <= t {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    };

    let mut deaths = Vec::new();
    let mut components = n;
    for t in thresholds {
        let now = count_components(t);
        deaths.extend(std::iter::repeat(t).take(components - now));
        components = now;
    }
    deaths
}
