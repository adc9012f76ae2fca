mod common;

use common::{any_graph, build, connected_graph, single_linkage_heights};
use phlayout_core::graph::{Graph, GraphFormat};
use phlayout_core::persistence::{brute_force_barcode, compute_barcode};
use phlayout_core::weighting::{
    ego_neighborhood, jaccard_weights, lengths_from_weights, shortest_path_metric,
};
use proptest::prelude::*;

fn deaths(graph: &Graph) -> Vec<f64> {
    let bc = compute_barcode(&lengths_from_weights(graph).unwrap());
    let mut d: Vec<f64> = bc.bars().iter().map(|b| b.death_length).collect();
    d.sort_by(f64::total_cmp);
    d
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

fn edge_list_text(graph: &Graph) -> Vec<String> {
    graph
        .edges()
        .iter()
        .map(|e| format!("{} {} {}", graph.node_id(e.source), graph.node_id(e.target), e.weight.unwrap()))
        .collect()
}

proptest! {
    #[test]
    fn bar_count_law((n, edges) in any_graph(14)) {
        let g = build(n, &edges);
        let bc = compute_barcode(&lengths_from_weights(&g).unwrap());
        prop_assert_eq!(bc.len(), n - g.connected_components().len());
        prop_assert_eq!(bc.component_count(), g.connected_components().len());
        prop_assert_eq!(bc.mst_edges().len() + g.connected_components().len(), n);
    }

    #[test]
    fn deaths_match_brute_force((n, edges) in connected_graph(12)) {
        let g = build(n, &edges);
        let wg = lengths_from_weights(&g).unwrap();
        let metric = shortest_path_metric(&wg).unwrap();
        let brute = brute_force_barcode(&metric);
        prop_assert!(close(&deaths(&g), &brute), "{:?} vs {:?}", deaths(&g), brute);
        let linkage = single_linkage_heights(n, |i, j| metric.get(i, j));
        prop_assert!(close(&deaths(&g), &linkage));
    }

    #[test]
    fn shortest_path_closure_changes_nothing((n, edges) in connected_graph(10)) {
        let g = build(n, &edges);
        let metric = shortest_path_metric(&lengths_from_weights(&g).unwrap()).unwrap();
        let closure: Vec<(usize, usize, Option<f64>)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, Some(1.0 / metric.get(i, j))))
            .collect();
        let complete = Graph::from_weighted_index_edges(n, closure);
        prop_assert!(close(&deaths(&g), &deaths(&complete)));
    }

    #[test]
    fn edge_order_never_changes_deaths((n, edges) in connected_graph(10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let g = build(n, &edges);
        let mut lines = edge_list_text(&g);
        lines.shuffle(&mut common::rng(seed));
        let shuffled = Graph::parse(&lines.join("\n"), GraphFormat::EdgeList).unwrap().graph;
        prop_assert_eq!(deaths(&g), deaths(&shuffled));
    }

    #[test]
    fn subsets_partition_the_component((n, edges) in any_graph(12)) {
        let g = build(n, &edges);
        let bc = compute_barcode(&lengths_from_weights(&g).unwrap());
        for bar in bc.bars() {
            let s = bc.subsets(bar.id).unwrap();
            let mut all: Vec<usize> = s.subset_u.iter().chain(&s.subset_v).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(&all, &bc.components()[bar.component_id]);
            prop_assert!(s.subset_u.contains(&bar.cause_u) && s.subset_v.contains(&bar.cause_v));
            let ratio = (s.subset_u.len().min(s.subset_v.len()), s.subset_u.len().max(s.subset_v.len()));
            prop_assert_eq!(ratio, bar.subset_ratio);
        }
    }

    #[test]
    fn json_round_trip((n, edges) in any_graph(12)) {
        let g = build(n, &edges);
        let again = Graph::parse(&g.to_json(), GraphFormat::GraphJson).unwrap().graph;
        prop_assert_eq!(&again, &g);
    }

    #[test]
    fn line_order_is_irrelevant((_n, edges) in any_graph(10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        // Duplicate every other edge so merging is exercised.
        let mut lines: Vec<String> = edges.iter().map(|(a, b, w)| format!("n{a} n{b} {w}")).collect();
        lines.extend(edges.iter().step_by(2).map(|(a, b, w)| format!("n{b} n{a} {w}")));
        let first = Graph::parse(&lines.join("\n"), GraphFormat::EdgeList).unwrap().graph;
        lines.shuffle(&mut common::rng(seed));
        let second = Graph::parse(&lines.join("\n"), GraphFormat::EdgeList).unwrap().graph;
        prop_assert_eq!(first, second);
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded((n, edges) in connected_graph(12), hops in 1usize..=3) {
        let g = build(n, &edges);
        let unweighted = Graph::from_index_edges(n, &g.edges().iter().map(|e| (e.source, e.target)).collect::<Vec<_>>());
        let wg = jaccard_weights(&unweighted, hops).unwrap();
        for (e, edge) in unweighted.edges().iter().enumerate() {
            let a = ego_neighborhood(&unweighted, edge.source, hops).unwrap();
            let b = ego_neighborhood(&unweighted, edge.target, hops).unwrap();
            let forward = a.intersection(&b).count() as f64 / a.union(&b).count() as f64;
            let backward = b.intersection(&a).count() as f64 / b.union(&a).count() as f64;
            prop_assert_eq!(forward, backward);
            prop_assert_eq!(wg.weight(e), forward.max(1e-6));
            prop_assert!(wg.weight(e) > 0.0 && wg.weight(e) <= 1.0);
        }
    }

    #[test]
    fn ego_neighborhoods_grow((n, edges) in any_graph(12), hops in 1usize..4) {
        let g = build(n, &edges);
        for v in 0..n {
            let inner = ego_neighborhood(&g, v, hops).unwrap();
            let outer = ego_neighborhood(&g, v, hops + 1).unwrap();
            prop_assert!(inner.is_subset(&outer));
            prop_assert!(inner.contains(&v));
        }
    }

    #[test]
    fn shortest_paths_form_a_metric((n, edges) in any_graph(10)) {
        let g = build(n, &edges);
        let wg = lengths_from_weights(&g).unwrap();
        let metric = shortest_path_metric(&wg).unwrap();
        prop_assert!(metric.is_metric(1e-9));
        for (e, edge) in g.edges().iter().enumerate() {
            prop_assert!(metric.get(edge.source, edge.target) <= 1.0 / wg.weight(e));
        }
    }
}
