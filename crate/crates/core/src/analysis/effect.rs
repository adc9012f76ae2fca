//! How far a layout moved the selected bars apart or together.
//!
//! A graph bar is carried into the embedded point cloud through its node
//! split: its layout persistence is the single-linkage height at which any
//! node of one subset first joins any node of the other, using Euclidean
//! distances between the positions of the bar's component.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::Selection;
use crate::persistence::{Barcode, DisjointSet, PersistenceError};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error("bar {0} lies in a component with fewer than two nodes")]
    TrivialComponent(usize),
    #[error("positions cover {found} nodes, expected {expected}")]
    SizeMismatch { expected: usize, found: usize },
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Single-linkage merge height between the two subsets of a bar.
pub fn layout_persistence(barcode: &Barcode, bar: usize, positions: &[[f64; 2]]) -> Result<f64, AnalysisError> {
    let record = barcode.bar(bar)?;
    let subsets = barcode.subsets(bar)?;
    let nodes = &barcode.components()[record.component_id];
    if nodes.len() < 2 {
        return Err(AnalysisError::TrivialComponent(bar));
    }
    if let Some(&max) = nodes.iter().max() {
        if max >= positions.len() {
            return Err(AnalysisError::SizeMismatch {
                expected: max + 1,
                found: positions.len(),
            });
        }
    }
    let pts: Vec<[f64; 2]> = nodes.iter().map(|&v| positions[v]).collect();
    let side: Vec<bool> = nodes
        .iter()
        .map(|v| subsets.subset_u.binary_search(v).is_ok())
        .collect();
    Ok(split_merge_height(&pts, &side))
}

/// Height at which a `true` point and a `false` point first share a
/// single-linkage cluster. Prim's algorithm builds the Euclidean minimum
/// spanning tree in O(n^2); its edges are then merged in length order.
pub fn split_merge_height(points: &[[f64; 2]], side: &[bool]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut link = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    best[0] = 0.0;
    for _ in 0..n {
        let v = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .expect("a vertex remains");
        in_tree[v] = true;
        if v != 0 {
            edges.push((best[v], link[v], v));
        }
        for u in 0..n {
            if !in_tree[u] {
                let d = distance(points[v], points[u]);
                if d < best[u] {
                    best[u] = d;
                    link[u] = v;
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut clusters = DisjointSet::new(n);
    let mut has = vec![[false; 2]; n];
    for (i, &s) in side.iter().enumerate() {
        has[i][usize::from(s)] = true;
    }
    for (d, a, b) in edges {
        let (ra, rb) = (clusters.find(a), clusters.find(b));
        let merged = [has[ra][0] || has[rb][0], has[ra][1] || has[rb][1]];
        clusters.union(a, b);
        let root = clusters.find(a);
        has[root] = merged;
        if merged[0] && merged[1] {
            return d;
        }
    }
    0.0
}

/// Per-bar source/target layout persistence and the averaged effects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    /// Mean relative decrease over contracted bars; `None` when none apply.
    pub e_c: Option<f64>,
    /// Mean relative increase over repulsed bars; `None` when none apply.
    pub e_r: Option<f64>,
    pub per_bar: BTreeMap<usize, (f64, f64)>,
    /// Selected bars left out because their source persistence is zero.
    pub excluded: Vec<usize>,
}

impl EffectReport {
    pub fn to_export(&self) -> MetricsExport {
        MetricsExport {
            e_c: self.e_c,
            e_r: self.e_r,
            bars: self
                .per_bar
                .iter()
                .map(|(&id, &(p_s, p_t))| BarMetrics { id, p_s, p_t })
                .collect(),
        }
    }
}

/// Metrics report export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsExport {
    #[serde(rename = "E_C")]
    pub e_c: Option<f64>,
    #[serde(rename = "E_R")]
    pub e_r: Option<f64>,
    pub bars: Vec<BarMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarMetrics {
    pub id: usize,
    #[serde(rename = "P_S")]
    pub p_s: f64,
    #[serde(rename = "P_T")]
    pub p_t: f64,
}

/// Compares a source layout with a target layout over the selected bars:
/// contracted bars (persistence below the threshold) and repulsed bars.
pub fn effect_metrics(
    source: &[[f64; 2]],
    target: &[[f64; 2]],
    selection: &Selection,
    barcode: &Barcode,
) -> Result<EffectReport, AnalysisError> {
    let mut per_bar = BTreeMap::new();
    let mut excluded = Vec::new();
    let mut measure = |id: usize| -> Result<Option<(f64, f64)>, AnalysisError> {
        if let Some(&pair) = per_bar.get(&id) {
            return Ok(Some(pair));
        }
        let p_s = layout_persistence(barcode, id, source)?;
        let p_t = layout_persistence(barcode, id, target)?;
        per_bar.insert(id, (p_s, p_t));
        if p_s > 0.0 {
            Ok(Some((p_s, p_t)))
        } else {
            if !excluded.contains(&id) {
                excluded.push(id);
            }
            Ok(None)
        }
    };

    let mut contraction = Vec::new();
    for bar in selection.contracted(barcode) {
        if let Some((p_s, p_t)) = measure(bar.id)? {
            contraction.push((p_s - p_t) / p_s);
        }
    }
    let mut repulsion = Vec::new();
    for &id in &selection.repulsed_bars {
        if let Some((p_s, p_t)) = measure(id)? {
            repulsion.push((p_t - p_s) / p_s);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    excluded.sort_unstable();
    Ok(EffectReport {
        e_c: mean(&contraction),
        e_r: mean(&repulsion),
        per_bar,
        excluded,
    })
}
