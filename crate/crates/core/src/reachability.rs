//! Which nodes have an illicit strict ancestor.
//!
//! Only those nodes can produce a walk that ends at an illicit node, so they
//! are the only ones handed to the walker. One multi-source traversal along
//! the original edge direction, started from every illicit node, marks the
//! whole set in linear time.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::graph::{NodeLabel, TransactionGraph};

/// Which illicit labels are visible to the walker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LabelPolicy {
    /// Every illicit label counts.
    #[default]
    AllPastLabels,
    /// Only illicit labels at or before `cutoff_step` count.
    TrainOnlyLabels { cutoff_step: u32 },
}

impl LabelPolicy {
    pub fn is_illicit(&self, graph: &TransactionGraph, idx: usize) -> bool {
        if graph.label(idx) != NodeLabel::Illicit {
            return false;
        }
        match *self {
            LabelPolicy::AllPastLabels => true,
            LabelPolicy::TrainOnlyLabels { cutoff_step } => graph.time_step(idx) <= cutoff_step,
        }
    }

    /// Illicit flag per dense node index.
    pub fn mask(&self, graph: &TransactionGraph) -> Vec<bool> {
        (0..graph.node_count())
            .map(|i| self.is_illicit(graph, i))
            .collect()
    }
}

/// Ids counted as illicit under `policy`, ascending.
pub fn illicit_set(graph: &TransactionGraph, policy: LabelPolicy) -> Vec<u64> {
    let mut ids: Vec<u64> = (0..graph.node_count())
        .filter(|&i| policy.is_illicit(graph, i))
        .map(|i| graph.id(i))
        .collect();
    ids.sort_unstable();
    ids
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityMap {
    can_reach: Vec<bool>,
    count: usize,
}

impl ReachabilityMap {
    /// Whether the node at dense index `idx` has an illicit strict ancestor.
    pub fn can_reach_illicit(&self, idx: usize) -> bool {
        self.can_reach[idx]
    }

    pub fn reachable_count(&self) -> usize {
        self.count
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.can_reach
    }
}

pub fn compute_reachability(graph: &TransactionGraph, policy: LabelPolicy) -> ReachabilityMap {
    reachability_from_mask(graph, &policy.mask(graph))
}

/// Same as [`compute_reachability`] for an explicit illicit mask.
pub fn reachability_from_mask(graph: &TransactionGraph, illicit: &[bool]) -> ReachabilityMap {
    let n = graph.node_count();
    let mut can_reach = vec![false; n];
    // Sources are expanded without being marked: a node's own label does
    // not make it reachable.
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| illicit[i]).collect();
    let mut count = 0;
    while let Some(v) = queue.pop_front() {
        for &w in graph.successor_indices(v) {
            let w = w as usize;
            if !can_reach[w] {
                can_reach[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    ReachabilityMap { can_reach, count }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;

    fn graph(labels: &[(u64, u32, NodeLabel)], edges: &[(u64, u64)]) -> TransactionGraph {
        let nodes = labels
            .iter()
            .map(|&(id, step, label)| Node::new(id, step, label, []))
            .collect();
        TransactionGraph::from_parts(nodes, edges).unwrap()
    }

    #[test]
    fn chain_from_illicit_root() {
        use NodeLabel::*;
        let g = graph(
            &[(1, 1, Illicit), (2, 1, Licit), (3, 1, Licit)],
            &[(1, 2), (2, 3)],
        );
        let map = compute_reachability(&g, LabelPolicy::AllPastLabels);
        let flags: Vec<bool> = (0..3).map(|i| map.can_reach_illicit(i)).collect();
        assert_eq!(flags, vec![false, true, true]);
        assert_eq!(map.reachable_count(), 2);
    }

    #[test]
    fn illicit_descendant_of_illicit_is_reachable() {
        use NodeLabel::*;
        let g = graph(&[(1, 1, Illicit), (2, 1, Illicit)], &[(1, 2)]);
        let map = compute_reachability(&g, LabelPolicy::AllPastLabels);
        assert!(!map.can_reach_illicit(g.index_of(1).unwrap()));
        assert!(map.can_reach_illicit(g.index_of(2).unwrap()));
    }

    #[test]
    fn train_only_hides_late_labels() {
        use NodeLabel::*;
        let g = graph(
            &[(1, 10, Illicit), (2, 40, Illicit), (3, 40, Licit)],
            &[(2, 3)],
        );
        assert_eq!(illicit_set(&g, LabelPolicy::AllPastLabels), vec![1, 2]);
        assert_eq!(
            illicit_set(&g, LabelPolicy::TrainOnlyLabels { cutoff_step: 34 }),
            vec![1]
        );
        let map = compute_reachability(&g, LabelPolicy::TrainOnlyLabels { cutoff_step: 34 });
        assert_eq!(map.reachable_count(), 0);
    }

    #[test]
    fn no_illicit_labels() {
        use NodeLabel::*;
        let g = graph(&[(1, 1, Licit), (2, 1, Unknown)], &[(1, 2)]);
        assert!(illicit_set(&g, LabelPolicy::AllPastLabels).is_empty());
        assert_eq!(
            compute_reachability(&g, LabelPolicy::AllPastLabels).reachable_count(),
            0
        );
    }
}
