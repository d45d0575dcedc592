//! Backward walks on a hand-built graph and the resulting feature rows.

use illicit_walk::{
    build_feature_table, compute_reachability, run_all, LabelPolicy, Node, NodeLabel,
    TransactionGraph, WalkConfig, FEATURE_NAMES,
};

fn main() -> illicit_walk::Result<()> {
    use NodeLabel::*;
    // 1 (illicit) -> 3 -> 5 -> 6 <- 4 <- 2 (licit), 7 is isolated
    let nodes = [
        (1, 1, Illicit),
        (2, 1, Licit),
        (3, 2, Unknown),
        (4, 2, Licit),
        (5, 3, Licit),
        (6, 4, Licit),
        (7, 4, Licit),
    ]
    .map(|(id, step, label)| Node::new(id, step, label, [0.0]))
    .to_vec();
    let graph = TransactionGraph::from_parts(nodes, &[(1, 3), (3, 5), (5, 6), (2, 4), (4, 6)])?;

    let reach = compute_reachability(&graph, LabelPolicy::AllPastLabels);
    println!(
        "{} of {} nodes can reach an illicit node",
        reach.reachable_count(),
        graph.node_count()
    );

    let config = WalkConfig {
        k_successful: 50,
        rng_seed: 7,
        ..Default::default()
    };
    let seeds = graph.labeled_ids();
    let stats = run_all(&graph, &seeds, &config, &reach)?;
    for s in stats.values() {
        println!(
            "seed {}: {} attempts for {} hits",
            s.seed_id,
            s.total_attempts,
            s.successful_lengths.len()
        );
    }

    let rows = build_feature_table(&stats, &seeds, config.k_successful)?;
    println!("txId {}", FEATURE_NAMES.join(" "));
    for r in &rows {
        let values: Vec<String> = r.values().iter().map(|v| format!("{v:.3}")).collect();
        println!("{} {}", r.node_id, values.join(" "));
    }
    Ok(())
}
