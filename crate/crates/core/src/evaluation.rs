//! Classification metrics with illicit as the positive class, plus
//! model-comparison helpers and permutation feature importance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::format_g17;
use crate::forest::{threshold_scores, ForestModel};
use crate::matrix::Matrix;
use crate::seeding;

/// False-positive-rate caps reported alongside the ROC curve.
pub const FPR_CAPS: [f64; 3] = [0.01, 0.05, 0.10];

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub r#fn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.r#fn
    }
}

pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix> {
    check_len(labels.len(), predictions.len())?;
    let mut cm = ConfusionMatrix::default();
    for (&l, &p) in labels.iter().zip(predictions) {
        match (l != 0, p != 0) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.r#fn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Degenerate denominators give 0 rather than an error.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> PrecisionRecall {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.r#fn);
    PrecisionRecall {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

/// Micro-averaged F1 over both classes. For single-label binary data this is
/// the accuracy.
pub fn micro_f1(labels: &[u8], predictions: &[u8]) -> Result<f64> {
    check_len(labels.len(), predictions.len())?;
    let correct = labels
        .iter()
        .zip(predictions)
        .filter(|(l, p)| (**l != 0) == (**p != 0))
        .count() as u64;
    let wrong = labels.len() as u64 - correct;
    // pooled over both classes: tp = correct, fp = fn = wrong
    Ok(ratio(2 * correct, 2 * correct + 2 * wrong))
}

pub fn accuracy(labels: &[u8], predictions: &[u8]) -> Result<f64> {
    check_len(labels.len(), predictions.len())?;
    let correct = labels
        .iter()
        .zip(predictions)
        .filter(|(l, p)| (**l != 0) == (**p != 0))
        .count() as u64;
    Ok(ratio(correct, labels.len() as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are predicted illicit. The first point uses +inf.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl Roc {
    /// Highest true-positive rate among points with false-positive rate at
    /// most `fpr_cap`.
    pub fn recall_at_fpr(&self, fpr_cap: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.fpr <= fpr_cap)
            .map(|p| p.tpr)
            .fold(0.0, f64::max)
    }
}

/// Step ROC over every distinct score (tied samples move together) and its
/// trapezoidal area.
pub fn roc_and_auc(labels: &[u8], scores: &[f64]) -> Result<Roc> {
    check_len(labels.len(), scores.len())?;
    let positives = labels.iter().filter(|&&l| l != 0).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: score,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

pub fn recall_at_fpr(labels: &[u8], scores: &[f64], fpr_cap: f64) -> Result<f64> {
    if !(fpr_cap > 0.0 && fpr_cap < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "fpr cap {fpr_cap} outside (0, 1)"
        )));
    }
    Ok(roc_and_auc(labels, scores)?.recall_at_fpr(fpr_cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepF1 {
    pub f1: f64,
    /// The step has no illicit labels, so its F1 is reported as 0.
    pub degenerate: bool,
}

/// Illicit F1 computed separately within each time step.
pub fn per_timestep_f1(
    labels: &[u8],
    predictions: &[u8],
    time_steps: &[u32],
) -> Result<BTreeMap<u32, StepF1>> {
    check_len(labels.len(), predictions.len())?;
    check_len(labels.len(), time_steps.len())?;
    let mut cells: BTreeMap<u32, ConfusionMatrix> = BTreeMap::new();
    for ((&l, &p), &step) in labels.iter().zip(predictions).zip(time_steps) {
        let cm = cells.entry(step).or_default();
        match (l != 0, p != 0) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.r#fn += 1,
        }
    }
    Ok(cells
        .into_iter()
        .map(|(step, cm)| {
            let degenerate = cm.tp + cm.r#fn == 0;
            let f1 = if degenerate {
                0.0
            } else {
                precision_recall_f1(&cm).f1
            };
            (step, StepF1 { f1, degenerate })
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TpDiff {
    /// Illicit rows caught by model b but not by model a.
    pub gained: Vec<usize>,
    /// Illicit rows caught by model a but not by model b.
    pub lost: Vec<usize>,
}

pub fn tp_diff(labels: &[u8], preds_a: &[u8], preds_b: &[u8]) -> Result<TpDiff> {
    check_len(labels.len(), preds_a.len())?;
    check_len(labels.len(), preds_b.len())?;
    let mut diff = TpDiff::default();
    for i in 0..labels.len() {
        if labels[i] == 0 {
            continue;
        }
        match (preds_a[i] != 0, preds_b[i] != 0) {
            (false, true) => diff.gained.push(i),
            (true, false) => diff.lost.push(i),
            _ => {}
        }
    }
    Ok(diff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub precision_illicit: f64,
    pub recall_illicit: f64,
    pub f1_illicit: f64,
    pub micro_f1: f64,
    pub auc: f64,
    /// Keyed by the caps in [`FPR_CAPS`], in the same order.
    pub recall_at_fpr: Vec<(f64, f64)>,
    pub roc_points: Vec<RocPoint>,
    pub per_timestep_f1: BTreeMap<u32, StepF1>,
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<String>,
}

/// Full report for scores on a labeled test set.
pub fn evaluate(
    labels: &[u8],
    scores: &[f64],
    time_steps: &[u32],
    threshold: f64,
) -> Result<EvaluationReport> {
    check_len(labels.len(), scores.len())?;
    let predictions = threshold_scores(scores, threshold);
    let cm = confusion(labels, &predictions)?;
    let pr = precision_recall_f1(&cm);
    let roc = roc_and_auc(labels, scores)?;
    let per_step = per_timestep_f1(labels, &predictions, time_steps)?;
    let mut warnings = Vec::new();
    if cm.tp + cm.fp == 0 {
        warnings.push("no illicit predictions; precision reported as 0".to_string());
    }
    for (step, s) in &per_step {
        if s.degenerate {
            warnings.push(format!(
                "time step {step} has no illicit labels; F1 reported as 0"
            ));
        }
    }
    Ok(EvaluationReport {
        precision_illicit: pr.precision,
        recall_illicit: pr.recall,
        f1_illicit: pr.f1,
        micro_f1: micro_f1(labels, &predictions)?,
        auc: roc.auc,
        recall_at_fpr: FPR_CAPS
            .iter()
            .map(|&c| (c, roc.recall_at_fpr(c)))
            .collect(),
        roc_points: roc.points,
        per_timestep_f1: per_step,
        confusion: cm,
        warnings,
    })
}

#[derive(Serialize)]
struct ReportFile {
    precision_illicit: f64,
    recall_illicit: f64,
    f1_illicit: f64,
    micro_f1: f64,
    auc: f64,
    recall_at_fpr_1: f64,
    recall_at_fpr_5: f64,
    recall_at_fpr_10: f64,
    tp: u64,
    fp: u64,
    tn: u64,
    r#fn: u64,
}

impl EvaluationReport {
    fn recall_at(&self, cap: f64) -> f64 {
        self.recall_at_fpr
            .iter()
            .find(|(c, _)| *c == cap)
            .map_or(0.0, |&(_, r)| r)
    }

    /// JSON with the fixed report keys.
    pub fn to_json(&self) -> Result<String> {
        let file = ReportFile {
            precision_illicit: self.precision_illicit,
            recall_illicit: self.recall_illicit,
            f1_illicit: self.f1_illicit,
            micro_f1: self.micro_f1,
            auc: self.auc,
            recall_at_fpr_1: self.recall_at(0.01),
            recall_at_fpr_5: self.recall_at(0.05),
            recall_at_fpr_10: self.recall_at(0.10),
            tp: self.confusion.tp,
            fp: self.confusion.fp,
            tn: self.confusion.tn,
            r#fn: self.confusion.r#fn,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// `time_step,f1`
    pub fn write_per_timestep_csv(&self, path: &Path) -> Result<()> {
        write_lines(
            path,
            "time_step,f1",
            self.per_timestep_f1
                .iter()
                .map(|(step, s)| format!("{step},{}", format_g17(s.f1))),
        )
    }

    /// `threshold,fpr,tpr`
    pub fn write_roc_csv(&self, path: &Path) -> Result<()> {
        write_lines(
            path,
            "threshold,fpr,tpr",
            self.roc_points.iter().map(|p| {
                let threshold = if p.threshold.is_infinite() {
                    "inf".to_string()
                } else {
                    format_g17(p.threshold)
                };
                format!("{threshold},{},{}", format_g17(p.fpr), format_g17(p.tpr))
            }),
        )
    }
}

pub(crate) fn write_lines(
    path: &Path,
    header: &str,
    lines: impl Iterator<Item = String>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = || -> std::io::Result<()> {
        writeln!(out, "{header}")?;
        for line in lines {
            writeln!(out, "{line}")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub column: usize,
    pub mean_f1_drop: f64,
    pub std_over_repeats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_f1: f64,
    pub repeats: usize,
    /// Ranked by mean drop, largest first; ties keep column order.
    pub features: Vec<FeatureImportance>,
    /// Features with a positive mean drop, in rank order.
    pub selected: Vec<String>,
}

impl ImportanceReport {
    /// The `n` highest-ranked selected features.
    pub fn top(&self, n: usize) -> Vec<String> {
        self.selected.iter().take(n).cloned().collect()
    }

    /// `rank,feature,mean_f1_drop,std_f1_drop,selected`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_lines(
            path,
            "rank,feature,mean_f1_drop,std_f1_drop,selected",
            self.features.iter().enumerate().map(|(i, f)| {
                format!(
                    "{},{},{},{},{}",
                    i + 1,
                    f.name,
                    format_g17(f.mean_f1_drop),
                    format_g17(f.std_over_repeats),
                    self.selected.contains(&f.name)
                )
            }),
        )
    }
}

/// Illicit-F1 drop after shuffling each of `columns` in `x`, one at a time.
///
/// `names[i]` names column `columns[i]`. Each (column, repeat) pair uses its
/// own RNG stream, so the result is fixed by `rng_seed`.
#[allow(clippy::too_many_arguments)]
pub fn permutation_importance(
    model: &ForestModel,
    x: &Matrix,
    y: &[u8],
    columns: &[usize],
    names: &[String],
    repeats: usize,
    rng_seed: u64,
    threshold: f64,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    check_len(x.rows(), y.len())?;
    check_len(columns.len(), names.len())?;
    if x.cols() != model.feature_count {
        return Err(Error::DimensionMismatch {
            expected: model.feature_count,
            got: x.cols(),
        });
    }
    if let Some(&bad) = columns.iter().find(|&&c| c >= x.cols()) {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            got: bad + 1,
        });
    }
    let illicit_f1 = |scores: &[f64]| -> Result<f64> {
        let cm = confusion(y, &threshold_scores(scores, threshold))?;
        Ok(precision_recall_f1(&cm).f1)
    };
    let baseline_f1 = illicit_f1(&model.predict_proba(x)?)?;

    let mut features = columns
        .par_iter()
        .zip(names)
        .map(|(&col, name)| -> Result<FeatureImportance> {
            let original = x.column(col);
            let mut shuffled_x = x.clone();
            let mut drops = Vec::with_capacity(repeats);
            for r in 0..repeats {
                let stream_seed =
                    seeding::item_seed(seeding::item_seed(rng_seed, col as u64), r as u64);
                let mut rng = seeding::stream(stream_seed);
                let mut values = original.clone();
                values.shuffle(&mut rng);
                shuffled_x.set_column(col, &values);
                let scores: Vec<f64> = (0..x.rows())
                    .map(|i| model.score_row(shuffled_x.row(i)))
                    .collect();
                drops.push(baseline_f1 - illicit_f1(&scores)?);
            }
            let mean = drops.iter().sum::<f64>() / repeats as f64;
            let var = drops.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / repeats as f64;
            Ok(FeatureImportance {
                name: name.clone(),
                column: col,
                mean_f1_drop: mean,
                std_over_repeats: var.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    features.sort_by(|a, b| b.mean_f1_drop.total_cmp(&a.mean_f1_drop));
    let selected = features
        .iter()
        .filter(|f| f.mean_f1_drop > 0.0)
        .map(|f| f.name.clone())
        .collect();
    Ok(ImportanceReport {
        baseline_f1,
        repeats,
        features,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_counts() {
        let cm = confusion(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fp: 1,
                tn: 1,
                r#fn: 1
            }
        );
        let perfect = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((perfect.fp, perfect.r#fn), (0, 0));
        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn table_rows_round_as_reported() {
        assert!((f1_score(0.91, 0.72) - 0.8039).abs() < 1e-4);
        assert!((f1_score(0.93, 0.76) - 0.8365).abs() < 1e-4);
    }

    #[test]
    fn degenerate_precision_recall() {
        let pr = precision_recall_f1(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 5,
            r#fn: 3,
        });
        assert_eq!((pr.precision, pr.recall, pr.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn micro_f1_is_accuracy() {
        assert_eq!(micro_f1(&[1, 0, 0, 1], &[1, 0, 0, 1]).unwrap(), 1.0);
        assert_eq!(micro_f1(&[1, 0, 0, 0], &[0, 0, 0, 0]).unwrap(), 0.75);
    }

    #[test]
    fn auc_extremes() {
        let roc = roc_and_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.recall_at_fpr(0.01), 1.0);
        assert_eq!(roc_and_auc(&[1, 0], &[0.4, 0.6]).unwrap().auc, 0.0);
        assert!(matches!(
            roc_and_auc(&[1, 1], &[0.4, 0.6]),
            Err(Error::SingleClassLabels)
        ));
    }

    #[test]
    fn constant_scores() {
        let roc = roc_and_auc(&[1, 0, 1, 0], &[0.5; 4]).unwrap();
        let coords: Vec<(f64, f64)> = roc.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(coords, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc.auc, 0.5);
        assert_eq!(recall_at_fpr(&[1, 0, 1, 0], &[0.5; 4], 0.01).unwrap(), 0.0);
        assert!(recall_at_fpr(&[1, 0], &[0.5; 2], 1.0).is_err());
    }

    #[test]
    fn per_step() {
        let single = per_timestep_f1(&[1, 0, 1], &[1, 1, 0], &[5, 5, 5]).unwrap();
        let global = precision_recall_f1(&confusion(&[1, 0, 1], &[1, 1, 0]).unwrap()).f1;
        assert_eq!(single[&5].f1, global);

        let two = per_timestep_f1(&[1, 1, 1, 1], &[1, 1, 0, 0], &[1, 1, 2, 2]).unwrap();
        assert_eq!((two[&1].f1, two[&2].f1), (1.0, 0.0));
        assert!(!two[&2].degenerate);

        let empty = per_timestep_f1(&[0, 0], &[1, 0], &[3, 3]).unwrap();
        assert!(empty[&3].degenerate);
        assert_eq!(empty[&3].f1, 0.0);
    }

    #[test]
    fn tp_gained_and_lost() {
        let same = tp_diff(&[1, 0, 1], &[1, 1, 0], &[1, 1, 0]).unwrap();
        assert!(same.gained.is_empty() && same.lost.is_empty());
        let d = tp_diff(&[1, 1], &[1, 0], &[0, 1]).unwrap();
        assert_eq!((d.gained, d.lost), (vec![1], vec![0]));
    }

    #[test]
    fn report_json_has_fixed_keys() {
        let report = evaluate(&[1, 0, 1, 0], &[0.9, 0.1, 0.4, 0.6], &[1, 1, 2, 2], 0.5).unwrap();
        let value: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        let keys: Vec<&str> = value
            .as_object()
            .unwrap()
            .keys()
            .map(String::as_str)
            .collect();
        let mut expected = vec![
            "precision_illicit",
            "recall_illicit",
            "f1_illicit",
            "micro_f1",
            "auc",
            "recall_at_fpr_1",
            "recall_at_fpr_5",
            "recall_at_fpr_10",
            "tp",
            "fp",
            "tn",
            "fn",
        ];
        let mut keys = keys;
        keys.sort_unstable();
        expected.sort_unstable();
        assert_eq!(keys, expected);
        assert_eq!(value["tp"], 1);
        assert_eq!(value["fn"], 1);
    }
}
