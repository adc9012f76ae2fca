#![allow(dead_code)]

use phlayout_core::graph::Graph;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type WeightedEdges = Vec<(usize, usize, f64)>;

/// Random spanning tree plus extra edges, weights in `[0.1, 10)`.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize, extra: f64) -> WeightedEdges {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(0.1..10.0)));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(extra) {
                edges.push((a, b, rng.gen_range(0.1..10.0)));
            }
        }
    }
    edges
}

/// Random graph that may be disconnected or have isolated nodes.
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, p: f64) -> WeightedEdges {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b, rng.gen_range(0.1..10.0)));
            }
        }
    }
    edges
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn build(n: usize, edges: &WeightedEdges) -> Graph {
    Graph::from_weighted_index_edges(n, edges.iter().map(|&(a, b, w)| (a, b, Some(w))))
}

/// Node count and weighted edges of a connected graph; weights drawn from a
/// small set so ties occur.
pub fn connected_graph(max_nodes: usize) -> impl Strategy<Value = (usize, WeightedEdges)> {
    (2..=max_nodes).prop_flat_map(|n| {
        let tree = (1..n).map(|v| (0..v, 1u32..=8)).collect::<Vec<_>>();
        let extra = proptest::collection::vec((0..n, 0..n, 1u32..=8), 0..=2 * n);
        (Just(n), tree, extra).prop_map(|(n, tree, extra)| {
            let mut edges: WeightedEdges = tree
                .into_iter()
                .enumerate()
                .map(|(i, (u, w))| (u, i + 1, w as f64 / 2.0))
                .collect();
            edges.extend(extra.into_iter().filter(|(a, b, _)| a != b).map(|(a, b, w)| (a, b, w as f64 / 2.0)));
            (n, edges)
        })
    })
}

/// Graphs that may be disconnected.
pub fn any_graph(max_nodes: usize) -> impl Strategy<Value = (usize, WeightedEdges)> {
    (1..=max_nodes).prop_flat_map(|n| {
        let edges = proptest::collection::vec((0..n, 0..n, 1u32..=8), 0..=2 * n);
        (Just(n), edges).prop_map(|(n, edges)| {
            let edges = edges
                .into_iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, w)| (a, b, w as f64))
                .collect();
            (n, edges)
        })
    })
}

/// Merge heights of naive agglomerative single linkage over a distance
/// function, ascending. Infinite distances never merge.
pub fn single_linkage_heights(n: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut heights = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| dist(i, j))
                    .fold(f64::INFINITY, f64::min);
                if d.is_finite() && best.map_or(true, |(bd, ..)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((d, a, b)) = best else { break };
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        heights.push(d);
    }
    heights.sort_by(f64::total_cmp);
    heights
}

/// Height at which single linkage first puts a `true` point and a `false`
/// point in one cluster.
pub fn naive_split_height(points: &[[f64; 2]], side: &[bool]) -> f64 {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((distance(points[i], points[j]), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (d, i, j) in pairs {
        let (li, lj) = (label[i], label[j]);
        if li == lj {
            continue;
        }
        for l in label.iter_mut() {
            if *l == lj {
                *l = li;
            }
        }
        let members: Vec<usize> = (0..n).filter(|&k| label[k] == li).collect();
        if members.iter().any(|&k| side[k]) && members.iter().any(|&k| !side[k]) {
            return d;
        }
    }
    0.0
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// All-pairs inverse-distance repulsion.
pub fn naive_repulsion(points: &[[f64; 2]], strength: f64) -> Vec<[f64; 2]> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut f = [0.0, 0.0];
            for (j, q) in points.iter().enumerate() {
                if i != j {
                    let d = [p[0] - q[0], p[1] - q[1]];
                    let r2 = d[0] * d[0] + d[1] * d[1];
                    f[0] += strength * d[0] / r2;
                    f[1] += strength * d[1] / r2;
                }
            }
            f
        })
        .collect()
}

pub fn relative_error(approx: [f64; 2], exact: [f64; 2]) -> f64 {
    distance(approx, exact) / exact[0].hypot(exact[1])
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.gen_range(-extent..extent), rng.gen_range(-extent..extent)])
        .collect()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// The barbell: two 50-cliques joined through a 50-node path.
pub fn barbell() -> Graph {
    use phlayout_core::graph::GraphFormat;
    Graph::parse(&fixture_text("barbell.edges"), GraphFormat::EdgeList).unwrap().graph
}

pub const FOUR_NODE: &str = "v2 v3 4\nv1 v2 3\nv1 v3 2\nv3 v4 1";
