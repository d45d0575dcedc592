//! Backward-in-time random walks.
//!
//! A walk starts at a seed and repeatedly moves to an incoming neighbor
//! chosen uniformly at random. It stops at the first illicit node reached
//! after the seed (a success) or at a node without incoming neighbors (a dead
//! end). Walks for a seed are repeated until `k` successes are collected.
//!
//! Each seed draws from its own RNG stream, derived from the configured seed
//! and the node id, so results do not depend on how seeds are scheduled.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TransactionGraph;
use crate::reachability::{LabelPolicy, ReachabilityMap};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Successful walks wanted per seed.
    pub k_successful: usize,
    pub rng_seed: u64,
    /// Give up on a seed after this many attempts. `None` keeps going until
    /// `k_successful` walks succeed.
    pub max_attempts_per_seed: Option<u64>,
    pub policy: LabelPolicy,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            k_successful: 100,
            rng_seed: 0,
            max_attempts_per_seed: None,
            policy: LabelPolicy::AllPastLabels,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_successful == 0 {
            return Err(Error::InvalidConfig(
                "number of successful walks must be at least 1".into(),
            ));
        }
        if let Some(cap) = self.max_attempts_per_seed {
            if cap < self.k_successful as u64 {
                return Err(Error::InvalidConfig(format!(
                    "attempt cap {cap} is below the {} successful walks requested",
                    self.k_successful
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WalkOutcome {
    /// Reached an illicit node after `length` edges.
    Success { length: u32, terminal_id: u64 },
    /// Stopped at a node with no incoming neighbors after `length` edges.
    DeadEnd { length: u32 },
}

impl WalkOutcome {
    pub fn length(&self) -> u32 {
        match *self {
            WalkOutcome::Success { length, .. } | WalkOutcome::DeadEnd { length } => length,
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, WalkOutcome::Success { .. })
    }
}

/// Raw walk results for one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedWalkStats {
    pub seed_id: u64,
    /// Lengths (in edges) of the successful walks, in sampling order.
    pub successful_lengths: Vec<u32>,
    pub distinct_terminals: BTreeSet<u64>,
    /// All walks performed, dead ends included.
    pub total_attempts: u64,
    /// The attempt cap was hit before enough walks succeeded.
    pub truncated: bool,
}

/// Performs one walk from dense index `seed`, reporting every visited node
/// (seed first) to `visit`.
fn walk_indices<R: Rng + ?Sized>(
    graph: &TransactionGraph,
    seed: usize,
    illicit: &[bool],
    rng: &mut R,
    mut visit: impl FnMut(usize),
) -> WalkOutcome {
    let mut current = seed;
    let mut length = 0u32;
    visit(current);
    loop {
        let preds = graph.predecessor_indices(current);
        if preds.is_empty() {
            return WalkOutcome::DeadEnd { length };
        }
        current = preds[rng.gen_range(0..preds.len())] as usize;
        length += 1;
        visit(current);
        if illicit[current] {
            return WalkOutcome::Success {
                length,
                terminal_id: graph.id(current),
            };
        }
    }
}

/// One walk from `seed_id`. `illicit` is the per-index illicit mask (see
/// [`LabelPolicy::mask`]); the seed's own flag is ignored.
pub fn sample_walk<R: Rng + ?Sized>(
    graph: &TransactionGraph,
    seed_id: u64,
    illicit: &[bool],
    rng: &mut R,
) -> Result<WalkOutcome> {
    let seed = graph.index_of(seed_id)?;
    Ok(walk_indices(graph, seed, illicit, rng, |_| {}))
}

/// Like [`sample_walk`], also returning the visited node ids, seed first.
pub fn sample_walk_path<R: Rng + ?Sized>(
    graph: &TransactionGraph,
    seed_id: u64,
    illicit: &[bool],
    rng: &mut R,
) -> Result<(WalkOutcome, Vec<u64>)> {
    let seed = graph.index_of(seed_id)?;
    let mut path = Vec::new();
    let outcome = walk_indices(graph, seed, illicit, rng, |v| path.push(graph.id(v)));
    Ok((outcome, path))
}

/// RNG stream used for walks seeded at `seed_id`.
pub fn seed_stream(rng_seed: u64, seed_id: u64) -> seeding::StreamRng {
    seeding::stream(seeding::item_seed(rng_seed, seed_id))
}

/// Whether any strict ancestor of `seed` is flagged illicit.
fn has_illicit_ancestor(graph: &TransactionGraph, seed: usize, illicit: &[bool]) -> bool {
    let mut seen = vec![false; graph.node_count()];
    let mut stack = vec![seed];
    while let Some(v) = stack.pop() {
        for &u in graph.predecessor_indices(v) {
            let u = u as usize;
            if illicit[u] {
                return true;
            }
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    false
}

fn collect_indices(
    graph: &TransactionGraph,
    seed: usize,
    config: &WalkConfig,
    illicit: &[bool],
) -> SeedWalkStats {
    let seed_id = graph.id(seed);
    let mut rng = seed_stream(config.rng_seed, seed_id);
    let cap = config.max_attempts_per_seed.unwrap_or(u64::MAX);
    let mut stats = SeedWalkStats {
        seed_id,
        successful_lengths: Vec::with_capacity(config.k_successful),
        distinct_terminals: BTreeSet::new(),
        total_attempts: 0,
        truncated: false,
    };
    while stats.successful_lengths.len() < config.k_successful {
        if stats.total_attempts >= cap {
            stats.truncated = true;
            break;
        }
        stats.total_attempts += 1;
        if let WalkOutcome::Success {
            length,
            terminal_id,
        } = walk_indices(graph, seed, illicit, &mut rng, |_| {})
        {
            stats.successful_lengths.push(length);
            stats.distinct_terminals.insert(terminal_id);
        }
    }
    stats
}

/// Repeats walks from `seed_id` until `config.k_successful` succeed or the
/// attempt cap is reached.
///
/// Without a cap, a seed with no illicit ancestor is rejected up front since
/// the loop could never finish.
pub fn collect_walks(
    graph: &TransactionGraph,
    seed_id: u64,
    config: &WalkConfig,
    illicit: &[bool],
) -> Result<SeedWalkStats> {
    config.validate()?;
    let seed = graph.index_of(seed_id)?;
    if config.max_attempts_per_seed.is_none() && !has_illicit_ancestor(graph, seed, illicit) {
        return Err(Error::WouldNotTerminate(seed_id));
    }
    Ok(collect_indices(graph, seed, config, illicit))
}

/// Walk statistics for every reachable seed in `seeds`; unreachable seeds
/// are left out. Runs on the current rayon pool. Output does not depend on
/// the number of worker threads.
pub fn run_all(
    graph: &TransactionGraph,
    seeds: &[u64],
    config: &WalkConfig,
    reach: &ReachabilityMap,
) -> Result<BTreeMap<u64, SeedWalkStats>> {
    config.validate()?;
    let illicit = config.policy.mask(graph);
    let mut reachable = Vec::new();
    for &id in seeds {
        let idx = graph.index_of(id)?;
        if reach.can_reach_illicit(idx) {
            reachable.push(idx);
        }
    }
    reachable.sort_unstable();
    reachable.dedup();
    Ok(reachable
        .par_iter()
        .map(|&idx| (graph.id(idx), collect_indices(graph, idx, config, &illicit)))
        .collect())
}
