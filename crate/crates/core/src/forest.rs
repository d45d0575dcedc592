//! Random forest for licit-vs-illicit scoring.
//!
//! CART trees with Gini impurity, grown on bootstrap samples. At each split a
//! random subset of `max_split_features` features is searched; thresholds
//! are midpoints between consecutive distinct values and `x <= threshold`
//! goes left. Ties on impurity go to the lowest feature index, then to the
//! lowest threshold. Every tree draws from its own RNG stream, so trees can
//! be grown in parallel and adding trees never changes earlier ones.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seeding;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features searched per split; clamped to the feature count.
    pub max_split_features: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 50,
            max_split_features: 50,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
            rng_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig(
                "forest needs at least one tree".into(),
            ));
        }
        if self.max_split_features == 0 {
            return Err(Error::InvalidConfig(
                "max_split_features must be at least 1".into(),
            ));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        positive_fraction: f64,
    },
}

/// Binary decision tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { positive_fraction } => return positive_fraction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            TreeNode::Split { feature, .. } => Some(feature as usize),
            TreeNode::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub trees: Vec<Tree>,
    pub feature_count: usize,
    pub config: ForestConfig,
    /// Fraction of positive labels in the training set.
    pub class_prior: f64,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

struct TreeGrower<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    config: &'a ForestConfig,
    max_features: usize,
    feature_order: Vec<usize>,
    pairs: Vec<(f64, u8)>,
}

impl TreeGrower<'_> {
    fn leaf(samples: &[u32], positives: usize) -> TreeNode {
        TreeNode::Leaf {
            positive_fraction: positives as f64 / samples.len() as f64,
        }
    }

    /// Best split over the features searched at this node. Constant features
    /// do not count toward `max_features`.
    fn best_split<R: Rng>(&mut self, samples: &[u32], rng: &mut R) -> Option<Candidate> {
        let n_features = self.feature_order.len();
        let total = samples.len() as f64;
        let total_pos = samples.iter().filter(|&&s| self.y[s as usize] == 1).count() as f64;
        let mut best: Option<Candidate> = None;
        let mut searched = 0;
        for drawn in 0..n_features {
            if searched == self.max_features {
                break;
            }
            let j = rng.gen_range(drawn..n_features);
            self.feature_order.swap(drawn, j);
            let feature = self.feature_order[drawn];

            self.pairs.clear();
            self.pairs.extend(
                samples
                    .iter()
                    .map(|&s| (self.x.get(s as usize, feature), self.y[s as usize])),
            );
            self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[self.pairs.len() - 1].0 {
                continue;
            }
            searched += 1;

            let (mut left_n, mut left_pos) = (0.0f64, 0.0f64);
            for i in 0..self.pairs.len() - 1 {
                left_n += 1.0;
                left_pos += f64::from(self.pairs[i].1);
                let (lo, hi) = (self.pairs[i].0, self.pairs[i + 1].0);
                if lo == hi {
                    continue;
                }
                let right_n = total - left_n;
                let right_pos = total_pos - left_pos;
                let left_neg = left_n - left_pos;
                let right_neg = right_n - right_pos;
                // Maximizing this is minimizing the weighted Gini impurity.
                let score = (left_pos * left_pos + left_neg * left_neg) / left_n
                    + (right_pos * right_pos + right_neg * right_neg) / right_n;
                let mut threshold = lo / 2.0 + hi / 2.0;
                if threshold >= hi || threshold < lo {
                    threshold = lo;
                }
                let candidate = Candidate {
                    score,
                    feature,
                    threshold,
                };
                if best.as_ref().is_none_or(|b| candidate.beats(b)) {
                    best = Some(candidate);
                }
            }
        }
        best
    }

    fn grow<R: Rng>(&mut self, root_samples: Vec<u32>, rng: &mut R) -> Tree {
        let mut nodes = vec![TreeNode::Leaf {
            positive_fraction: 0.0,
        }];
        let mut stack = vec![(0usize, root_samples, 0usize)];
        while let Some((slot, samples, depth)) = stack.pop() {
            let positives = samples.iter().filter(|&&s| self.y[s as usize] == 1).count();
            let stop = samples.len() < self.config.min_samples_split
                || positives == 0
                || positives == samples.len()
                || self.config.max_depth.is_some_and(|d| depth >= d);
            if stop {
                nodes[slot] = Self::leaf(&samples, positives);
                continue;
            }
            let Some(split) = self.best_split(&samples, rng) else {
                nodes[slot] = Self::leaf(&samples, positives);
                continue;
            };
            let (left, right): (Vec<u32>, Vec<u32>) = samples
                .iter()
                .partition(|&&s| self.x.get(s as usize, split.feature) <= split.threshold);
            let left_slot = nodes.len();
            nodes.push(TreeNode::Leaf {
                positive_fraction: 0.0,
            });
            nodes.push(TreeNode::Leaf {
                positive_fraction: 0.0,
            });
            nodes[slot] = TreeNode::Split {
                feature: split.feature as u32,
                threshold: split.threshold,
                left: left_slot as u32,
                right: left_slot as u32 + 1,
            };
            stack.push((left_slot + 1, right, depth + 1));
            stack.push((left_slot, left, depth + 1));
        }
        Tree { nodes }
    }
}

/// Trains a forest on rows of `x` with binary labels `y` (1 = illicit).
/// Trees are grown on the current rayon pool.
pub fn fit(x: &Matrix, y: &[u8], config: &ForestConfig) -> Result<ForestModel> {
    config.validate()?;
    let n = x.rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidConfig(
            "need at least two training rows".into(),
        ));
    }
    if x.cols() == 0 {
        return Err(Error::InvalidConfig(
            "need at least one feature column".into(),
        ));
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidConfig(format!(
            "labels must be 0 or 1, found {bad}"
        )));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass);
    }
    if let Some((row, col)) = x.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }

    let max_features = config.max_split_features.min(x.cols());
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeding::stream(seeding::item_seed(config.rng_seed, t as u64));
            let samples: Vec<u32> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            let mut grower = TreeGrower {
                x,
                y,
                config,
                max_features,
                feature_order: (0..x.cols()).collect(),
                pairs: Vec::with_capacity(n),
            };
            grower.grow(samples, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        trees,
        feature_count: x.cols(),
        config: *config,
        class_prior: positives as f64 / n as f64,
    })
}

impl ForestModel {
    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                got: x.cols(),
            });
        }
        Ok(())
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(row)).sum();
        sum / self.trees.len() as f64
    }

    /// Mean leaf positive fraction over all trees, per row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| self.score_row(x.row(i)))
            .collect())
    }

    /// `1` where the score is at least `threshold`.
    pub fn predict(&self, x: &Matrix, threshold: f64) -> Result<Vec<u8>> {
        Ok(threshold_scores(&self.predict_proba(x)?, threshold))
    }

    /// Whether any tree splits on `feature`.
    pub fn uses_feature(&self, feature: usize) -> bool {
        self.trees
            .iter()
            .any(|t| t.split_features().any(|f| f == feature))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: ForestModel = serde_json::from_reader(BufReader::new(file))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

pub fn threshold_scores(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}
