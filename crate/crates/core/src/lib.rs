//! Distance-to-illicit features for temporal transaction graphs.
//!
//! Given a transaction DAG whose edges run from older to newer transactions,
//! this crate samples random walks backward in time from each labeled node,
//! stopping at the first known illicit transaction, and summarizes the walk
//! lengths into nine features per node. A small random forest and the usual
//! classification metrics are included to measure what the features add.
//!
//! ```text
//! load_graph ──► compute_reachability ──► run_all ──► build_feature_table
//!                                                         │
//!            temporal_split ──► assemble ──► fit ──► evaluate
//! ```
//!
//! Runnable examples live in `examples/`, one per capability.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod forest;
pub mod graph;
pub mod matrix;
pub mod pipeline;
pub mod reachability;
pub mod seeding;
pub mod walker;

pub use error::{Error, Result};
pub use evaluation::{
    confusion, evaluate, micro_f1, per_timestep_f1, permutation_importance, precision_recall_f1,
    recall_at_fpr, roc_and_auc, tp_diff, ConfusionMatrix, EvaluationReport, ImportanceReport,
};
pub use features::{
    build_feature_table, fill_unreachable, read_feature_table, summarize, write_feature_table,
    GwFeatureRow, FEATURE_NAMES, SELECTED_FEATURES,
};
pub use forest::{fit, ForestConfig, ForestModel};
pub use graph::{
    load_graph, write_graph, Node, NodeLabel, TemporalSplit, TransactionGraph, ValidationReport,
};
pub use matrix::Matrix;
pub use pipeline::{FeatureSetSpec, SynthConfig};
pub use reachability::{compute_reachability, illicit_set, LabelPolicy, ReachabilityMap};
pub use walker::{collect_walks, run_all, sample_walk, SeedWalkStats, WalkConfig, WalkOutcome};
