mod common;

use std::collections::HashSet;

use illicit_walk::{compute_reachability, illicit_set, LabelPolicy};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_per_node_dfs(seed in any::<u64>(), n in 1usize..=50, p in 0.01f64..0.2) {
        let graph = common::random_dag(seed, n, p, 0.2);
        let illicit: HashSet<u64> = illicit_set(&graph, LabelPolicy::AllPastLabels).into_iter().collect();
        let expected = common::brute_force_reachable(&graph, &illicit);
        let map = compute_reachability(&graph, LabelPolicy::AllPastLabels);
        let got: HashSet<u64> = (0..graph.node_count())
            .filter(|&i| map.can_reach_illicit(i))
            .map(|i| graph.id(i))
            .collect();
        prop_assert_eq!(map.reachable_count(), got.len());
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn more_visible_labels_never_remove_reachability(seed in any::<u64>(), n in 1usize..=60) {
        let graph = common::random_dag(seed, n, 0.08, 0.2);
        let cutoff = (graph.max_time_step() / 2).max(1);
        let narrow = compute_reachability(&graph, LabelPolicy::TrainOnlyLabels { cutoff_step: cutoff });
        let wide = compute_reachability(&graph, LabelPolicy::AllPastLabels);
        for i in 0..graph.node_count() {
            prop_assert!(!narrow.can_reach_illicit(i) || wide.can_reach_illicit(i));
        }
    }

    #[test]
    fn fixed_point(seed in any::<u64>(), n in 1usize..=60) {
        let graph = common::random_dag(seed, n, 0.08, 0.2);
        let policy = LabelPolicy::AllPastLabels;
        let map = compute_reachability(&graph, policy);
        for v in 0..graph.node_count() {
            let preds = graph.predecessor_indices(v);
            if preds.is_empty() {
                prop_assert!(!map.can_reach_illicit(v));
            }
            let supported = preds
                .iter()
                .any(|&u| policy.is_illicit(&graph, u as usize) || map.can_reach_illicit(u as usize));
            prop_assert_eq!(map.can_reach_illicit(v), supported);
        }
    }
}
