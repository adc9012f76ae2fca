//! Undirected graph model with edge-list and JSON parsing.
//!
//! Nodes are kept in lexicographic id order and edges in `(source, target)`
//! index order with `source < target`, so a graph parsed from any permutation
//! of the same records is identical.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: non-positive weight {weight}")]
    NonPositiveWeight { line: usize, weight: f64 },
    #[error("line {line}: mixed weighted and unweighted edges")]
    MixedWeights { line: usize },
    #[error("edge references unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("graph has no nodes")]
    Empty,
    #[error("invalid graph json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    EdgeList,
    GraphJson,
}

impl FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "edge_list" | "edges" | "edgelist" => Ok(GraphFormat::EdgeList),
            "graph_json" | "json" => Ok(GraphFormat::GraphJson),
            other => Err(format!("unknown graph format `{other}`")),
        }
    }
}

impl GraphFormat {
    /// Guess the format from a file name: `.json` is graph JSON, anything
    /// else an edge list.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => GraphFormat::GraphJson,
            _ => GraphFormat::EdgeList,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeRecord {
    pub id: String,
    pub category: Option<String>,
    pub degree: usize,
}

/// An undirected edge between two node indices, `source < target`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub source: usize,
    pub target: usize,
    pub weight: Option<f64>,
}

/// Non-fatal conditions met while building a graph.
#[derive(Clone, Debug, PartialEq)]
pub enum ParseWarning {
    SelfLoopDropped { line: usize, node: String },
    DuplicateEdgeMerged { line: usize, source: String, target: String },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::SelfLoopDropped { line, node } => {
                write!(f, "line {line}: self-loop on `{node}` dropped")
            }
            ParseWarning::DuplicateEdgeMerged { line, source, target } => {
                write!(f, "line {line}: duplicate edge {source}-{target} merged")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// A parsed graph plus the diagnostics produced while building it.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub graph: Graph,
    pub warnings: Vec<ParseWarning>,
}

/// Collects raw node and edge records and normalizes them into a [`Graph`].
#[derive(Default)]
pub struct GraphBuilder {
    nodes: BTreeMap<String, Option<String>>,
    edges: Vec<(String, String, Option<f64>, usize)>,
    weighted: Option<bool>,
    strict_nodes: bool,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a node. Declaring the same id twice is an error.
    pub fn node(&mut self, id: &str, category: Option<&str>) -> Result<&mut Self> {
        if self.nodes.contains_key(id) {
            return Err(GraphError::DuplicateNode(id.to_string()));
        }
        self.nodes
            .insert(id.to_string(), category.map(str::to_string));
        Ok(self)
    }

    /// Edges must reference nodes declared with [`GraphBuilder::node`].
    pub fn require_declared_nodes(&mut self) -> &mut Self {
        self.strict_nodes = true;
        self
    }

    pub fn edge(
        &mut self,
        source: &str,
        target: &str,
        weight: Option<f64>,
        line: usize,
    ) -> Result<&mut Self> {
        if let Some(w) = weight {
            if !(w > 0.0) || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight { line, weight: w });
            }
        }
        match self.weighted {
            None => self.weighted = Some(weight.is_some()),
            Some(prev) if prev != weight.is_some() => {
                return Err(GraphError::MixedWeights { line })
            }
            _ => {}
        }
        self.edges
            .push((source.to_string(), target.to_string(), weight, line));
        Ok(self)
    }

    pub fn build(self) -> Result<Parsed> {
        let GraphBuilder {
            mut nodes,
            edges,
            strict_nodes,
            ..
        } = self;
        for (s, t, _, _) in &edges {
            for id in [s, t] {
                if !nodes.contains_key(id.as_str()) {
                    if strict_nodes {
                        return Err(GraphError::UnknownNode(id.clone()));
                    }
                    nodes.insert(id.clone(), None);
                }
            }
        }

        let node_list: Vec<NodeRecord> = nodes
            .into_iter()
            .map(|(id, category)| NodeRecord {
                id,
                category,
                degree: 0,
            })
            .collect();
        let index: HashMap<String, usize> = node_list
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();

        let mut warnings = Vec::new();
        let mut merged: BTreeMap<(usize, usize), (Vec<f64>, bool)> = BTreeMap::new();
        for (s, t, w, line) in edges {
            let (a, b) = (index[&s], index[&t]);
            if a == b {
                log::warn!("line {line}: dropping self-loop on `{s}`");
                warnings.push(ParseWarning::SelfLoopDropped { line, node: s });
                continue;
            }
            let key = (a.min(b), a.max(b));
            let entry = merged.entry(key).or_insert_with(|| (Vec::new(), false));
            if entry.1 || !entry.0.is_empty() {
                warnings.push(ParseWarning::DuplicateEdgeMerged {
                    line,
                    source: s,
                    target: t,
                });
            }
            entry.1 = true;
            if let Some(w) = w {
                entry.0.push(w);
            }
        }

        let edge_list = merged
            .into_iter()
            .map(|((source, target), (mut weights, _))| {
                // Sum in sorted order so the merged value ignores input order.
                weights.sort_by(f64::total_cmp);
                let weight = if weights.is_empty() {
                    None
                } else {
                    Some(weights.iter().sum())
                };
                EdgeRecord {
                    source,
                    target,
                    weight,
                }
            })
            .collect();
        Ok(Parsed {
            graph: Graph::from_parts(node_list, edge_list),
            warnings,
        })
    }
}

impl Graph {
    fn from_parts(mut nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (e, edge) in edges.iter().enumerate() {
            adjacency[edge.source].push((edge.target, e));
            adjacency[edge.target].push((edge.source, e));
        }
        for (node, adj) in nodes.iter_mut().zip(&adjacency) {
            node.degree = adj.len();
        }
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        Graph {
            nodes,
            edges,
            index,
            adjacency,
        }
    }

    /// Unweighted graph on `n` nodes named by their index, for generated
    /// inputs. Edge pairs may repeat or appear in either orientation.
    pub fn from_index_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        Self::from_weighted_index_edges(n, edges.iter().map(|&(a, b)| (a, b, None)))
    }

    /// Weighted counterpart of [`Graph::from_index_edges`]; duplicates have
    /// their weights summed.
    pub fn from_weighted_index_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, Option<f64>)>,
    ) -> Self {
        let width = n.to_string().len();
        let mut builder = GraphBuilder::new();
        for i in 0..n {
            builder
                .node(&format!("{i:0width$}"), None)
                .expect("generated ids are unique");
        }
        builder.require_declared_nodes();
        for (line, (a, b, w)) in edges.into_iter().enumerate() {
            builder
                .edge(&format!("{a:0width$}"), &format!("{b:0width$}"), w, line + 1)
                .expect("generated edges are valid");
        }
        builder.build().expect("generated graph is valid").graph
    }

    pub fn parse(text: &str, format: GraphFormat) -> Result<Parsed> {
        match format {
            GraphFormat::EdgeList => parse_edge_list(text),
            GraphFormat::GraphJson => parse_graph_json(text),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn node(&self, index: usize) -> &NodeRecord {
        &self.nodes[index]
    }

    pub fn node_id(&self, index: usize) -> &str {
        &self.nodes[index].id
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// `(neighbor, edge index)` pairs incident to `node`.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn is_weighted(&self) -> bool {
        self.edges.first().is_some_and(|e| e.weight.is_some())
    }

    /// Connected components as sorted blocks of node indices, ordered by their
    /// smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.nodes.len()];
        let mut blocks = Vec::new();
        for start in 0..self.nodes.len() {
            if label[start] != usize::MAX {
                continue;
            }
            let id = blocks.len();
            let mut block = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < block.len() {
                let v = block[head];
                head += 1;
                for &(u, _) in &self.adjacency[v] {
                    if label[u] == usize::MAX {
                        label[u] = id;
                        block.push(u);
                    }
                }
            }
            block.sort_unstable();
            blocks.push(block);
        }
        blocks
    }

    /// Degree mapped linearly onto `[0, 1]`, indexed like [`Graph::nodes`].
    /// Constant-degree graphs map every node to 0.
    pub fn degree_color_scale(&self) -> Result<Vec<f64>> {
        let degrees = self.nodes.iter().map(|n| n.degree);
        let (lo, hi) = degrees
            .clone()
            .fold(None, |acc: Option<(usize, usize)>, d| match acc {
                None => Some((d, d)),
                Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
            })
            .ok_or(GraphError::Empty)?;
        if lo == hi {
            return Ok(vec![0.0; self.nodes.len()]);
        }
        let span = (hi - lo) as f64;
        Ok(degrees.map(|d| (d - lo) as f64 / span).collect())
    }

    pub fn to_json_value(&self) -> GraphJson {
        GraphJson {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeJson {
                    id: n.id.clone(),
                    category: n.category.clone(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    source: self.nodes[e.source].id.clone(),
                    target: self.nodes[e.target].id.clone(),
                    weight: e.weight,
                })
                .collect(),
        }
    }

    /// Canonical graph JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("graph json serializes")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GraphJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NodeJson {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EdgeJson {
    pub source: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl GraphJson {
    pub fn into_graph(self) -> Result<Parsed> {
        let mut builder = GraphBuilder::new();
        for node in &self.nodes {
            builder.node(&node.id, node.category.as_deref())?;
        }
        builder.require_declared_nodes();
        for (i, edge) in self.edges.iter().enumerate() {
            builder.edge(&edge.source, &edge.target, edge.weight, i + 1)?;
        }
        builder.build()
    }
}

fn parse_edge_list(text: &str) -> Result<Parsed> {
    let mut builder = GraphBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let weight = match fields.len() {
            2 => None,
            3 => Some(fields[2].parse::<f64>().map_err(|_| GraphError::Malformed {
                line,
                message: format!("weight `{}` is not a number", fields[2]),
            })?),
            n => {
                return Err(GraphError::Malformed {
                    line,
                    message: format!("expected `SOURCE TARGET [WEIGHT]`, found {n} fields"),
                })
            }
        };
        builder.edge(fields[0], fields[1], weight, line)?;
    }
    builder.build()
}

fn parse_graph_json(text: &str) -> Result<Parsed> {
    let raw: GraphJson =
        serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
    raw.into_graph()
}
