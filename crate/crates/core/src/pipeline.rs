//! End-to-end runs: feature extraction, training and evaluation with a
//! chosen feature set, importance ranking, and synthetic dataset
//! generation. The CLI is a thin layer over these functions.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{evaluate, permutation_importance, EvaluationReport, ImportanceReport};
use crate::features::{build_feature_table, GwFeatureRow, FEATURE_NAMES, SELECTED_FEATURES};
use crate::forest::{fit, threshold_scores, ForestConfig, ForestModel};
use crate::graph::{write_graph, Node, NodeLabel, TransactionGraph};
use crate::matrix::Matrix;
use crate::reachability::{compute_reachability, LabelPolicy};
use crate::seeding;
use crate::walker::{run_all, WalkConfig};

/// File names written by [`write_synthetic`].
pub const SYNTH_FEATURES_FILE: &str = "txs_features.csv";
pub const SYNTH_CLASSES_FILE: &str = "txs_classes.csv";
pub const SYNTH_EDGES_FILE: &str = "txs_edgelist.csv";

/// Runs `f` on a rayon pool with `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "worker count must be at least 1".into(),
            ));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSetSpec {
    /// Every column of the features file.
    Af,
    /// The nine walk features.
    Gwf,
    AfPlusGwf,
    /// All original columns plus the five selected walk features.
    AfPlusGwfStar,
    Custom(Vec<String>),
}

impl FromStr for FeatureSetSpec {
    type Err = String;

    /// Parses `af`, `gwf`, `af+gwf`, `af+gwf*`, or a comma-separated column list.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "af" => Ok(FeatureSetSpec::Af),
            "gwf" => Ok(FeatureSetSpec::Gwf),
            "af+gwf" => Ok(FeatureSetSpec::AfPlusGwf),
            "af+gwf*" | "gwf-star" => Ok(FeatureSetSpec::AfPlusGwfStar),
            "custom" => Err("custom feature sets need a column list".to_string()),
            _ => {
                let cols: Vec<String> = s
                    .split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect();
                if cols.is_empty() {
                    Err(format!("unknown feature set `{s}`"))
                } else {
                    Ok(FeatureSetSpec::Custom(cols))
                }
            }
        }
    }
}

impl fmt::Display for FeatureSetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSetSpec::Af => f.write_str("af"),
            FeatureSetSpec::Gwf => f.write_str("gwf"),
            FeatureSetSpec::AfPlusGwf => f.write_str("af+gwf"),
            FeatureSetSpec::AfPlusGwfStar => f.write_str("af+gwf*"),
            FeatureSetSpec::Custom(cols) => f.write_str(&cols.join(",")),
        }
    }
}

/// Name of original feature column `j` (0-based): `f1` is the time step.
pub fn af_column_name(j: usize) -> String {
    format!("f{}", j + 1)
}

impl FeatureSetSpec {
    /// Column names for a graph with `af_width` original features.
    pub fn resolve(&self, af_width: usize) -> Result<Vec<String>> {
        let af = || (0..af_width).map(af_column_name);
        let gwf = FEATURE_NAMES.iter().map(|s| s.to_string());
        let cols: Vec<String> = match self {
            FeatureSetSpec::Af => af().collect(),
            FeatureSetSpec::Gwf => gwf.collect(),
            FeatureSetSpec::AfPlusGwf => af().chain(gwf).collect(),
            FeatureSetSpec::AfPlusGwfStar => af()
                .chain(SELECTED_FEATURES.iter().map(|s| s.to_string()))
                .collect(),
            FeatureSetSpec::Custom(cols) => cols.clone(),
        };
        if cols.is_empty() {
            return Err(Error::InvalidConfig(
                "feature set resolves to no columns".into(),
            ));
        }
        for c in &cols {
            if ColumnRef::parse(c, af_width).is_none() {
                return Err(Error::UnknownColumn(c.clone()));
            }
        }
        Ok(cols)
    }

    pub fn needs_walk_features(&self, af_width: usize) -> bool {
        self.resolve(af_width)
            .map(|cols| {
                cols.iter()
                    .any(|c| matches!(ColumnRef::parse(c, af_width), Some(ColumnRef::Walk(_))))
            })
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnRef {
    Original(usize),
    Walk(usize),
}

impl ColumnRef {
    fn parse(name: &str, af_width: usize) -> Option<Self> {
        if let Some(i) = FEATURE_NAMES.iter().position(|&n| n == name) {
            return Some(ColumnRef::Walk(i));
        }
        let j: usize = name.strip_prefix('f')?.parse().ok()?;
        (1..=af_width)
            .contains(&j)
            .then(|| ColumnRef::Original(j - 1))
    }
}

/// Rows of a labeled design matrix, aligned with `ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub columns: Vec<String>,
    pub ids: Vec<u64>,
    pub time_steps: Vec<u32>,
    pub x: Matrix,
    /// 1 = illicit.
    pub y: Vec<u8>,
}

/// Builds the design matrix for the labeled nodes `ids`.
pub fn assemble(
    graph: &TransactionGraph,
    walk_rows: Option<&HashMap<u64, GwFeatureRow>>,
    columns: &[String],
    ids: &[u64],
) -> Result<Design> {
    let af_width = graph.feature_dim();
    let refs: Vec<ColumnRef> = columns
        .iter()
        .map(|c| ColumnRef::parse(c, af_width).ok_or_else(|| Error::UnknownColumn(c.clone())))
        .collect::<Result<_>>()?;
    let needs_walk = refs.iter().any(|r| matches!(r, ColumnRef::Walk(_)));
    if needs_walk && walk_rows.is_none() {
        return Err(Error::InvalidConfig(
            "feature set needs a walk feature table (--gwf)".into(),
        ));
    }

    let mut data = Vec::with_capacity(ids.len() * refs.len());
    let mut y = Vec::with_capacity(ids.len());
    let mut time_steps = Vec::with_capacity(ids.len());
    for &id in ids {
        let idx = graph.index_of(id)?;
        let label = match graph.label(idx) {
            NodeLabel::Illicit => 1,
            NodeLabel::Licit => 0,
            NodeLabel::Unknown => {
                return Err(Error::InvalidConfig(format!("node {id} is unlabeled")));
            }
        };
        let walk = if needs_walk {
            let row = walk_rows
                .and_then(|m| m.get(&id))
                .ok_or_else(|| Error::FeatureTable(format!("no walk features for node {id}")))?;
            Some(row.values())
        } else {
            None
        };
        let features = graph.features(idx);
        for r in &refs {
            data.push(match *r {
                ColumnRef::Original(j) => features[j],
                ColumnRef::Walk(i) => walk.expect("walk row present")[i],
            });
        }
        y.push(label);
        time_steps.push(graph.time_step(idx));
    }
    Ok(Design {
        columns: columns.to_vec(),
        ids: ids.to_vec(),
        time_steps,
        x: Matrix::new(ids.len(), refs.len(), data)?,
        y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    pub walks: usize,
    pub policy: LabelPolicy,
    pub max_attempts: Option<u64>,
    pub rng_seed: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            walks: 100,
            policy: LabelPolicy::AllPastLabels,
            max_attempts: None,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub seeds: usize,
    pub reachable: usize,
    pub truncated: usize,
    pub mean_attempts: f64,
    pub elapsed: Duration,
}

/// Walk features for every labeled node, ascending by id. Uses the current
/// rayon pool.
pub fn extract_features(
    graph: &TransactionGraph,
    opts: &ExtractOptions,
) -> Result<(Vec<GwFeatureRow>, ExtractSummary)> {
    let start = Instant::now();
    let config = WalkConfig {
        k_successful: opts.walks,
        rng_seed: seeding::component_seed(opts.rng_seed, "walker"),
        max_attempts_per_seed: opts.max_attempts,
        policy: opts.policy,
    };
    config.validate()?;
    let seeds = graph.labeled_ids();
    let reach = compute_reachability(graph, opts.policy);
    let stats = run_all(graph, &seeds, &config, &reach)?;
    let rows = build_feature_table(&stats, &seeds, opts.walks)?;
    let attempts: u64 = stats.values().map(|s| s.total_attempts).sum();
    let summary = ExtractSummary {
        seeds: seeds.len(),
        reachable: stats.len(),
        truncated: stats.values().filter(|s| s.truncated).count(),
        mean_attempts: if stats.is_empty() {
            0.0
        } else {
            attempts as f64 / stats.len() as f64
        },
        elapsed: start.elapsed(),
    };
    Ok((rows, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainEvalOptions {
    pub feature_set: FeatureSetSpec,
    pub cutoff: u32,
    pub n_trees: usize,
    pub max_split_features: usize,
    pub threshold: f64,
    pub rng_seed: u64,
}

impl Default for TrainEvalOptions {
    fn default() -> Self {
        TrainEvalOptions {
            feature_set: FeatureSetSpec::Af,
            cutoff: 34,
            n_trees: 50,
            max_split_features: 50,
            threshold: 0.5,
            rng_seed: 0,
        }
    }
}

impl TrainEvalOptions {
    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            max_split_features: self.max_split_features,
            rng_seed: seeding::component_seed(self.rng_seed, "forest"),
            ..ForestConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainEvalOutput {
    pub model: ForestModel,
    pub train: Design,
    pub test: Design,
    pub test_scores: Vec<f64>,
    pub test_predictions: Vec<u8>,
    pub report: EvaluationReport,
}

fn index_rows(rows: &[GwFeatureRow]) -> HashMap<u64, GwFeatureRow> {
    rows.iter().map(|r| (r.node_id, *r)).collect()
}

/// Fits on the labeled nodes up to the cutoff step and evaluates on the rest.
pub fn train_eval(
    graph: &TransactionGraph,
    walk_rows: Option<&[GwFeatureRow]>,
    opts: &TrainEvalOptions,
) -> Result<TrainEvalOutput> {
    let columns = opts.feature_set.resolve(graph.feature_dim())?;
    let split = graph.temporal_split(opts.cutoff)?;
    if split.train_ids.is_empty() {
        return Err(Error::EmptySplit("training"));
    }
    if split.test_ids.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    let index = walk_rows.map(index_rows);
    let train = assemble(graph, index.as_ref(), &columns, &split.train_ids)?;
    let test = assemble(graph, index.as_ref(), &columns, &split.test_ids)?;
    let model = fit(&train.x, &train.y, &opts.forest_config())?;
    let test_scores = model.predict_proba(&test.x)?;
    let test_predictions = threshold_scores(&test_scores, opts.threshold);
    let report = evaluate(&test.y, &test_scores, &test.time_steps, opts.threshold)?;
    Ok(TrainEvalOutput {
        model,
        train,
        test,
        test_scores,
        test_predictions,
        report,
    })
}

/// Trains as in [`train_eval`], then ranks the walk-feature columns of the
/// feature set by permutation importance on the test split.
pub fn rank_walk_features(
    graph: &TransactionGraph,
    walk_rows: &[GwFeatureRow],
    opts: &TrainEvalOptions,
    repeats: usize,
) -> Result<ImportanceReport> {
    let out = train_eval(graph, Some(walk_rows), opts)?;
    let af_width = graph.feature_dim();
    let (cols, names): (Vec<usize>, Vec<String>) = out
        .test
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(ColumnRef::parse(c, af_width), Some(ColumnRef::Walk(_))))
        .map(|(i, c)| (i, c.clone()))
        .unzip();
    if cols.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "feature set `{}` has no walk features to rank",
            opts.feature_set
        )));
    }
    permutation_importance(
        &out.model,
        &out.test.x,
        &out.test.y,
        &cols,
        &names,
        repeats,
        seeding::component_seed(opts.rng_seed, "importance"),
        opts.threshold,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub n_timesteps: u32,
    pub illicit_fraction: f64,
    /// Probability that each predecessor of an illicit node is drawn from
    /// the earlier illicit nodes of its step rather than uniformly.
    pub cluster_bias: f64,
    /// Number of generated feature columns (the time step column is extra).
    pub feature_dim: usize,
    /// Shift of the illicit class mean, in standard deviations, on every
    /// generated feature.
    pub feature_signal: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_nodes: 5000,
            n_timesteps: 49,
            illicit_fraction: 0.1,
            cluster_bias: 0.5,
            feature_dim: 8,
            feature_signal: 0.5,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.illicit_fraction > 0.0 && self.illicit_fraction < 1.0) {
            return bad(format!(
                "illicit fraction {} outside (0, 1)",
                self.illicit_fraction
            ));
        }
        if self.illicit_fraction * (self.n_nodes as f64) < 1.0 {
            return bad("fewer than one expected illicit node".into());
        }
        if self.n_timesteps < 1 {
            return bad("need at least one time step".into());
        }
        if self.n_nodes < self.n_timesteps as usize {
            return bad(format!(
                "{} nodes cannot fill {} time steps",
                self.n_nodes, self.n_timesteps
            ));
        }
        if self.feature_dim < 1 {
            return bad("feature dimension must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.cluster_bias) {
            return bad(format!("cluster bias {} outside [0, 1]", self.cluster_bias));
        }
        if !self.feature_signal.is_finite() {
            return bad("feature signal must be finite".into());
        }
        Ok(())
    }
}

/// Probability that a non-first node of a step has no predecessors.
const SOURCE_PROBABILITY: f64 = 0.15;
const MAX_PREDECESSORS: usize = 3;

/// Generates a temporal DAG in the same shape as the public dataset: one
/// connected burst of transactions per time step, edges only from older to
/// newer nodes within a step, every node labeled.
pub fn generate_synthetic(config: &SynthConfig) -> Result<TransactionGraph> {
    config.validate()?;
    let mut rng = seeding::stream(seeding::component_seed(config.rng_seed, "synth"));
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let steps = config.n_timesteps as usize;
    let base = config.n_nodes / steps;
    let extra = config.n_nodes % steps;

    let mut nodes = Vec::with_capacity(config.n_nodes);
    let mut edges = Vec::new();
    let mut next_id = 1u64;
    for step in 0..steps {
        let size = base + usize::from(step < extra);
        let time_step = step as u32 + 1;
        let mut step_ids: Vec<u64> = Vec::with_capacity(size);
        let mut illicit_ids: Vec<u64> = Vec::new();
        for pos in 0..size {
            let id = next_id;
            next_id += 1;
            let illicit = rng.gen_bool(config.illicit_fraction);
            if pos > 0 && !rng.gen_bool(SOURCE_PROBABILITY) {
                let count = rng.gen_range(1..=MAX_PREDECESSORS.min(pos));
                let mut chosen: Vec<u64> = Vec::with_capacity(count);
                for _ in 0..count {
                    let clustered =
                        illicit && !illicit_ids.is_empty() && rng.gen_bool(config.cluster_bias);
                    let pred = if clustered {
                        illicit_ids[rng.gen_range(0..illicit_ids.len())]
                    } else {
                        step_ids[rng.gen_range(0..step_ids.len())]
                    };
                    if !chosen.contains(&pred) {
                        chosen.push(pred);
                    }
                }
                edges.extend(chosen.into_iter().map(|p| (p, id)));
            }
            let shift = if illicit { config.feature_signal } else { 0.0 };
            let values: Vec<f64> = (0..config.feature_dim)
                .map(|_| shift + noise.sample(&mut rng))
                .collect();
            let label = if illicit {
                NodeLabel::Illicit
            } else {
                NodeLabel::Licit
            };
            nodes.push(Node::new(id, time_step, label, values));
            step_ids.push(id);
            if illicit {
                illicit_ids.push(id);
            }
        }
    }
    TransactionGraph::from_parts(nodes, &edges)
}

/// Paths of the three dataset files inside `dir`.
pub fn synthetic_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(SYNTH_FEATURES_FILE),
        dir.join(SYNTH_CLASSES_FILE),
        dir.join(SYNTH_EDGES_FILE),
    )
}

/// Generates a dataset and writes it to `dir` (created if missing).
pub fn write_synthetic(config: &SynthConfig, dir: &Path) -> Result<TransactionGraph> {
    let graph = generate_synthetic(config)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (features, classes, edges) = synthetic_paths(dir);
    write_graph(&graph, &features, &classes, &edges)?;
    Ok(graph)
}
