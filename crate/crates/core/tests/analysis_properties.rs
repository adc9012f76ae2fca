mod common;

use std::collections::BTreeSet;

use common::{any_graph, build, connected_graph, naive_split_height, random_points};
use phlayout_core::analysis::{effect_metrics, greedy_modularity, layout_persistence, modularity};
use phlayout_core::layout::Selection;
use phlayout_core::persistence::compute_barcode;
use phlayout_core::weighting::lengths_from_weights;
use proptest::prelude::*;

fn rigid(points: &[[f64; 2]], angle: f64, shift: [f64; 2]) -> Vec<[f64; 2]> {
    let (s, c) = angle.sin_cos();
    points
        .iter()
        .map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]])
        .collect()
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_persistence_matches_naive_linkage((n, edges) in connected_graph(50), seed in any::<u64>()) {
        let g = build(n, &edges);
        let barcode = compute_barcode(&lengths_from_weights(&g).unwrap());
        let positions = random_points(&mut common::rng(seed), n, 100.0);
        for bar in barcode.bars() {
            let subsets = barcode.subsets(bar.id).unwrap();
            let side: Vec<bool> = (0..n).map(|v| subsets.subset_u.contains(&v)).collect();
            let expected = naive_split_height(&positions, &side);
            prop_assert_eq!(layout_persistence(&barcode, bar.id, &positions).unwrap(), expected);
        }
    }

    #[test]
    fn effect_ignores_rigid_motion(
        (n, edges) in connected_graph(16),
        seed in any::<u64>(),
        angle in -3.2f64..3.2,
        shift in (-500.0f64..500.0, -500.0f64..500.0),
        threshold in 0.0f64..5.0,
    ) {
        let g = build(n, &edges);
        let barcode = compute_barcode(&lengths_from_weights(&g).unwrap());
        let mut rng = common::rng(seed);
        let source = random_points(&mut rng, n, 100.0);
        let target = random_points(&mut rng, n, 100.0);
        let selection = Selection { contraction_threshold: threshold, repulsed_bars: BTreeSet::from([0]) };
        let before = effect_metrics(&source, &target, &selection, &barcode).unwrap();
        let after = effect_metrics(
            &rigid(&source, angle, [shift.0, shift.1]),
            &rigid(&target, -angle, [shift.1, shift.0]),
            &selection,
            &barcode,
        )
        .unwrap();
        for (id, (p_s, p_t)) in &before.per_bar {
            let (q_s, q_t) = after.per_bar[id];
            prop_assert!(near(*p_s, q_s, 1e-9) && near(*p_t, q_t, 1e-9));
        }
        for (a, b) in [(before.e_c, after.e_c), (before.e_r, after.e_r)] {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!(near(a, b, 1e-8)),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn scaling_the_target_scales_p_t(
        (n, edges) in connected_graph(16),
        seed in any::<u64>(),
        scale in 0.1f64..10.0,
    ) {
        let g = build(n, &edges);
        let barcode = compute_barcode(&lengths_from_weights(&g).unwrap());
        let mut rng = common::rng(seed);
        let source = random_points(&mut rng, n, 100.0);
        let target = random_points(&mut rng, n, 100.0);
        let scaled: Vec<[f64; 2]> = target.iter().map(|p| [scale * p[0], scale * p[1]]).collect();
        let selection = Selection { contraction_threshold: 10.0, repulsed_bars: BTreeSet::from([0]) };
        let before = effect_metrics(&source, &target, &selection, &barcode).unwrap();
        let after = effect_metrics(&source, &scaled, &selection, &barcode).unwrap();
        for (id, (p_s, p_t)) in &before.per_bar {
            let (q_s, q_t) = after.per_bar[id];
            prop_assert_eq!(*p_s, q_s);
            prop_assert!(near(q_t, scale * p_t, 1e-12));
        }
        // E_R = mean(P_T / P_S) - 1, so it moves affinely with the scale.
        let ratio_mean: f64 = before.e_r.unwrap() + 1.0;
        prop_assert!(near(after.e_r.unwrap(), scale * ratio_mean - 1.0, 1e-9));
    }

    #[test]
    fn greedy_tracks_from_scratch_modularity((n, edges) in any_graph(14)) {
        let g = build(n, &edges);
        let wg = lengths_from_weights(&g).unwrap();
        let h = greedy_modularity(&wg);
        for m in 0..=h.merges.len() {
            let labels = h.labels(n - m).unwrap();
            prop_assert!((modularity(&wg, &labels) - h.q_after(m)).abs() < 1e-9);
        }
    }
}
