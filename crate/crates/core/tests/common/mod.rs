#![allow(dead_code)]

use std::collections::HashSet;

use illicit_walk::{Node, NodeLabel, TransactionGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random DAG with `n` nodes. Nodes are laid out in a random topological
/// order with non-decreasing time steps; each forward pair becomes an edge
/// with probability `edge_p`; each node is illicit with probability
/// `illicit_p`, otherwise licit (10% unknown).
pub fn random_dag(seed: u64, n: usize, edge_p: f64, illicit_p: f64) -> TransactionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 7 + 3).collect();
    ids.shuffle(&mut rng);
    let mut step = 1u32;
    let mut nodes = Vec::with_capacity(n);
    for &id in &ids {
        if rng.gen_bool(0.2) {
            step += 1;
        }
        let label = if rng.gen_bool(illicit_p) {
            NodeLabel::Illicit
        } else if rng.gen_bool(0.1) {
            NodeLabel::Unknown
        } else {
            NodeLabel::Licit
        };
        nodes.push(Node::new(
            id,
            step,
            label,
            [rng.gen::<f64>(), rng.gen_range(-5.0..5.0)],
        ));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(edge_p) {
                edges.push((ids[i], ids[j]));
            }
        }
    }
    TransactionGraph::from_parts(nodes, &edges).expect("random dag")
}

/// Ids with an illicit strict ancestor, by DFS over reversed edges from each
/// node separately.
pub fn brute_force_reachable(graph: &TransactionGraph, illicit: &HashSet<u64>) -> HashSet<u64> {
    let edges: Vec<(u64, u64)> = graph.edges().collect();
    let mut out = HashSet::new();
    for &v in graph.ids() {
        let mut stack = vec![v];
        let mut seen = HashSet::new();
        let mut found = false;
        while let Some(x) = stack.pop() {
            for &(s, d) in &edges {
                if d == x && seen.insert(s) {
                    if illicit.contains(&s) {
                        found = true;
                    }
                    stack.push(s);
                }
            }
        }
        if found {
            out.insert(v);
        }
    }
    out
}

/// Exact walk statistics from `seed` by enumerating every maximal backward
/// path: (success probability, E[length | success], Var[length | success]).
pub fn walk_oracle(graph: &TransactionGraph, seed: u64, illicit: &HashSet<u64>) -> (f64, f64, f64) {
    fn go(
        graph: &TransactionGraph,
        node: u64,
        depth: u32,
        prob: f64,
        illicit: &HashSet<u64>,
        acc: &mut (f64, f64, f64),
    ) {
        if depth > 0 && illicit.contains(&node) {
            let d = f64::from(depth);
            acc.0 += prob;
            acc.1 += prob * d;
            acc.2 += prob * d * d;
            return;
        }
        let preds = graph.predecessors(node).unwrap();
        let p = prob / preds.len() as f64;
        for u in preds {
            go(graph, u, depth + 1, p, illicit, acc);
        }
    }
    let mut acc = (0.0, 0.0, 0.0);
    go(graph, seed, 0, 1.0, illicit, &mut acc);
    let (p, m1, m2) = acc;
    if p == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = m1 / p;
    (p, mean, m2 / p - mean * mean)
}
