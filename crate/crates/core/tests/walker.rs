mod common;

use std::collections::HashSet;

use illicit_walk::pipeline::with_workers;
use illicit_walk::walker::{sample_walk_path, seed_stream};
use illicit_walk::{
    collect_walks, compute_reachability, run_all, LabelPolicy, Node, NodeLabel, TransactionGraph,
    WalkConfig, WalkOutcome,
};
use proptest::prelude::*;

fn longest_backward_path(graph: &TransactionGraph) -> usize {
    let order = graph.topological_order().unwrap();
    let mut depth = vec![0usize; graph.node_count()];
    for &v in &order {
        for &u in graph.predecessor_indices(v) {
            depth[v] = depth[v].max(depth[u as usize] + 1);
        }
    }
    depth.into_iter().max().unwrap_or(0)
}

#[test]
fn diamond_terminals() {
    use NodeLabel::*;
    // i1 -> a -> s, i2 -> b -> s
    let nodes = [
        (1, Illicit),
        (2, Illicit),
        (3, Licit),
        (4, Licit),
        (5, Licit),
    ]
    .map(|(id, l)| Node::new(id, 1, l, []))
    .to_vec();
    let graph = TransactionGraph::from_parts(nodes, &[(1, 3), (2, 4), (3, 5), (4, 5)]).unwrap();
    let mask = LabelPolicy::AllPastLabels.mask(&graph);
    let config = WalkConfig {
        k_successful: 100,
        ..Default::default()
    };
    // P(only one terminal seen) = 2^(1-k), negligible at k = 100.
    let stats = collect_walks(&graph, 5, &config, &mask).unwrap();
    assert!(stats.successful_lengths.iter().all(|&l| l == 2));
    assert_eq!(
        stats.distinct_terminals.iter().copied().collect::<Vec<_>>(),
        vec![1, 2]
    );
    assert_eq!(stats.total_attempts, 100);
}

#[test]
fn same_results_for_any_worker_count() {
    let graph = common::random_dag(42, 300, 0.02, 0.05);
    let reach = compute_reachability(&graph, LabelPolicy::AllPastLabels);
    let config = WalkConfig {
        k_successful: 30,
        rng_seed: 9,
        ..Default::default()
    };
    let seeds = graph.labeled_ids();
    let one = with_workers(Some(1), || run_all(&graph, &seeds, &config, &reach))
        .unwrap()
        .unwrap();
    let eight = with_workers(Some(8), || run_all(&graph, &seeds, &config, &reach))
        .unwrap()
        .unwrap();
    assert!(!one.is_empty());
    assert_eq!(
        serde_json::to_string(&one).unwrap(),
        serde_json::to_string(&eight).unwrap()
    );
    let expected: HashSet<u64> = seeds
        .iter()
        .copied()
        .filter(|&id| reach.can_reach_illicit(graph.index_of(id).unwrap()))
        .collect();
    assert_eq!(one.keys().copied().collect::<HashSet<_>>(), expected);
}

#[test]
fn hit_rate_and_mean_length_match_enumeration() {
    let graph = common::random_dag(5, 10, 0.35, 0.2);
    let mask = LabelPolicy::AllPastLabels.mask(&graph);
    let illicit: HashSet<u64> = (0..graph.node_count())
        .filter(|&i| mask[i])
        .map(|i| graph.id(i))
        .collect();
    let mut checked = 0;
    for &seed in graph.ids() {
        let (p, mean, var) = common::walk_oracle(&graph, seed, &illicit);
        if p == 0.0 {
            continue;
        }
        let config = WalkConfig {
            k_successful: 1000,
            rng_seed: 1,
            ..Default::default()
        };
        let stats = collect_walks(&graph, seed, &config, &mask).unwrap();
        let attempts = stats.total_attempts as f64;
        let hit = 1000.0 / attempts;
        assert!(
            (hit - p).abs() <= 3.0 * (p * (1.0 - p) / attempts).sqrt() + 1e-12,
            "seed {seed}: {hit} vs {p}"
        );
        let emp = stats
            .successful_lengths
            .iter()
            .map(|&l| f64::from(l))
            .sum::<f64>()
            / 1000.0;
        assert!(
            (emp - mean).abs() <= 3.0 * (var / 1000.0).sqrt() + 1e-12,
            "seed {seed}: {emp} vs {mean}"
        );
        checked += 1;
    }
    assert!(checked > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn walks_follow_reversed_edges(seed in any::<u64>(), n in 1usize..40, rng_seed in any::<u64>()) {
        let graph = common::random_dag(seed, n, 0.15, 0.15);
        let mask = LabelPolicy::AllPastLabels.mask(&graph);
        let edges: HashSet<(u64, u64)> = graph.edges().collect();
        let bound = longest_backward_path(&graph);
        for &start in graph.ids() {
            let mut rng = seed_stream(rng_seed, start);
            for _ in 0..5 {
                let (outcome, path) = sample_walk_path(&graph, start, &mask, &mut rng).unwrap();
                prop_assert_eq!(path[0], start);
                prop_assert_eq!(path.len() as u32, outcome.length() + 1);
                prop_assert!(outcome.length() as usize <= bound);
                for w in path.windows(2) {
                    prop_assert!(edges.contains(&(w[1], w[0])));
                }
                let last = *path.last().unwrap();
                let is_illicit = |id: u64| mask[graph.index_of(id).unwrap()];
                // illicit nodes appear only as the terminal of a success
                prop_assert!(path.iter().skip(1).take(path.len().saturating_sub(2)).all(|&v| !is_illicit(v)));
                match outcome {
                    WalkOutcome::Success { terminal_id, .. } => {
                        prop_assert_eq!(terminal_id, last);
                        prop_assert!(is_illicit(last));
                        prop_assert!(path.len() >= 2);
                    }
                    WalkOutcome::DeadEnd { .. } => {
                        prop_assert!(graph.predecessors(last).unwrap().is_empty());
                        prop_assert!(path.len() == 1 || !is_illicit(last));
                    }
                }
            }
        }
    }

    #[test]
    fn stats_invariants(seed in any::<u64>(), n in 2usize..40, k in 1usize..20) {
        let graph = common::random_dag(seed, n, 0.15, 0.15);
        let reach = compute_reachability(&graph, LabelPolicy::AllPastLabels);
        let config = WalkConfig { k_successful: k, rng_seed: seed, ..Default::default() };
        let all = run_all(&graph, graph.ids(), &config, &reach).unwrap();
        let again = run_all(&graph, graph.ids(), &config, &reach).unwrap();
        prop_assert_eq!(&all, &again);
        for stats in all.values() {
            prop_assert_eq!(stats.successful_lengths.len(), k);
            prop_assert!(stats.total_attempts >= k as u64);
            prop_assert!(!stats.truncated);
            prop_assert!(!stats.distinct_terminals.is_empty());
            prop_assert!(stats.distinct_terminals.len() <= k);
            prop_assert!(stats.successful_lengths.iter().all(|&l| l >= 1));
        }
    }
}
