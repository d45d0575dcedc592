//! The nine walk-summary features per seed, plus the fill row used for
//! seeds that cannot reach an illicit node.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::walker::SeedWalkStats;

/// Feature column names, in table order.
pub const FEATURE_NAMES: [&str; 9] = [
    "min", "max", "mean", "std", "median", "q25", "q75", "hit", "illicit",
];

/// The reduced subset kept after importance ranking.
pub const SELECTED_FEATURES: [&str; 5] = ["hit", "std", "illicit", "max", "mean"];

const TABLE_HEADER: &str = "txId,min,max,mean,std,median,q25,q75,hit,illicit,reachable";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwFeatureRow {
    pub node_id: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub hit: f64,
    pub illicit: i64,
    pub reachable: bool,
}

impl GwFeatureRow {
    /// Feature values in [`FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; 9] {
        [
            self.min,
            self.max,
            self.mean,
            self.std,
            self.median,
            self.q25,
            self.q75,
            self.hit,
            self.illicit as f64,
        ]
    }

    /// Value of the named feature.
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values()[i])
    }
}

/// Linear interpolation between closest ranks on sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Summarizes one seed's successful walks.
///
/// `k` is the number of successful walks requested; a stats entry with a
/// different count is rejected unless it was truncated by the attempt cap.
/// Empty stats have no summary and must be filled with
/// [`fill_unreachable`] instead.
pub fn summarize(stats: &SeedWalkStats, k: usize) -> Result<GwFeatureRow> {
    let n = stats.successful_lengths.len();
    if n == 0 {
        return Err(Error::FeatureTable(format!(
            "seed {} has no successful walks to summarize",
            stats.seed_id
        )));
    }
    if n > k || (n < k && !stats.truncated) {
        return Err(Error::FeatureTable(format!(
            "seed {} has {n} successful walks, expected {k}",
            stats.seed_id
        )));
    }
    let mut sorted: Vec<f64> = stats
        .successful_lengths
        .iter()
        .map(|&l| f64::from(l))
        .collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let count = n as f64;
    let mean = sorted.iter().sum::<f64>() / count;
    let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / count;
    Ok(GwFeatureRow {
        node_id: stats.seed_id,
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        std: var.sqrt(),
        median: quantile(&sorted, 0.5),
        q25: quantile(&sorted, 0.25),
        q75: quantile(&sorted, 0.75),
        hit: count / stats.total_attempts as f64,
        illicit: stats.distinct_terminals.len() as i64,
        reachable: true,
    })
}

/// Row for a node with no path from any illicit node.
pub fn fill_unreachable(node_id: u64) -> GwFeatureRow {
    GwFeatureRow {
        node_id,
        min: -1.0,
        max: -1.0,
        mean: -1.0,
        std: -1.0,
        median: -1.0,
        q25: -1.0,
        q75: -1.0,
        hit: 0.0,
        illicit: -1,
        reachable: false,
    }
}

/// One row per seed, ascending by id. Seeds without stats, or whose walks
/// all failed under an attempt cap, get the fill row.
pub fn build_feature_table(
    stats: &BTreeMap<u64, SeedWalkStats>,
    seeds: &[u64],
    k: usize,
) -> Result<Vec<GwFeatureRow>> {
    let mut ids = seeds.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if let Some(stray) = stats.keys().find(|id| ids.binary_search(id).is_err()) {
        return Err(Error::FeatureTable(format!(
            "stats for {stray}, which is not a seed"
        )));
    }
    ids.iter()
        .map(|&id| match stats.get(&id) {
            Some(s) if !s.successful_lengths.is_empty() => summarize(s, k),
            _ => Ok(fill_unreachable(id)),
        })
        .collect()
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros dropped.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_feature_table(path: &Path, rows: &[GwFeatureRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{TABLE_HEADER}")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.node_id,
                format_g17(r.min),
                format_g17(r.max),
                format_g17(r.mean),
                format_g17(r.std),
                format_g17(r.median),
                format_g17(r.q25),
                format_g17(r.q75),
                format_g17(r.hit),
                r.illicit,
                r.reachable,
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_feature_table(path: &Path) -> Result<Vec<GwFeatureRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TABLE_HEADER {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header `{TABLE_HEADER}`"),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::malformed(path, line, format!("invalid {what}"));
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| bad(FEATURE_NAMES[i - 1]))
        };
        rows.push(GwFeatureRow {
            node_id: record[0].parse().map_err(|_| bad("txId"))?,
            min: num(1)?,
            max: num(2)?,
            mean: num(3)?,
            std: num(4)?,
            median: num(5)?,
            q25: num(6)?,
            q75: num(7)?,
            hit: num(8)?,
            illicit: record[9].parse().map_err(|_| bad("illicit"))?,
            reachable: record[10].parse().map_err(|_| bad("reachable"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn stats(lengths: &[u32], attempts: u64, terminals: &[u64]) -> SeedWalkStats {
        SeedWalkStats {
            seed_id: 9,
            successful_lengths: lengths.to_vec(),
            distinct_terminals: terminals.iter().copied().collect::<BTreeSet<_>>(),
            total_attempts: attempts,
            truncated: false,
        }
    }

    #[test]
    fn two_lengths() {
        let r = summarize(&stats(&[2, 4], 4, &[1]), 2).unwrap();
        assert_eq!((r.min, r.max, r.mean, r.std), (2.0, 4.0, 3.0, 1.0));
        assert_eq!((r.median, r.q25, r.q75), (3.0, 2.5, 3.5));
        assert_eq!((r.hit, r.illicit), (0.5, 1));
        assert!(r.reachable);
    }

    #[test]
    fn constant_lengths() {
        let r = summarize(&stats(&[3, 3, 3, 3], 4, &[1]), 4).unwrap();
        for v in [r.min, r.max, r.mean, r.median, r.q25, r.q75] {
            assert_eq!(v, 3.0);
        }
        assert_eq!(r.std, 0.0);
        assert_eq!(r.hit, 1.0);
    }

    #[test]
    fn five_lengths() {
        let r = summarize(&stats(&[4, 1, 5, 3, 2], 10, &[1, 2, 3]), 5).unwrap();
        assert_eq!((r.q25, r.median, r.q75, r.mean), (2.0, 3.0, 4.0, 3.0));
        assert!((r.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((r.hit, r.illicit), (0.5, 3));
    }

    #[test]
    fn wrong_k_and_empty() {
        assert!(summarize(&stats(&[1, 2], 2, &[1]), 3).is_err());
        assert!(summarize(&stats(&[], 5, &[]), 3).is_err());
        let mut partial = stats(&[1, 2], 50, &[1]);
        partial.truncated = true;
        assert_eq!(summarize(&partial, 3).unwrap().hit, 2.0 / 50.0);
    }

    #[test]
    fn fill_row() {
        let r = fill_unreachable(4);
        assert_eq!(
            r.values(),
            [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 0.0, -1.0]
        );
        assert!(!r.reachable);
        assert_eq!(
            GwFeatureRow {
                node_id: 4,
                ..fill_unreachable(77)
            },
            r
        );
    }

    #[test]
    fn table_orders_and_fills() {
        let mut map = BTreeMap::new();
        map.insert(9, stats(&[1, 1], 2, &[5]));
        let rows = build_feature_table(&map, &[12, 9, 3], 2).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.node_id).collect::<Vec<_>>(),
            vec![3, 9, 12]
        );
        assert_eq!(rows.iter().filter(|r| r.reachable).count(), 1);
        assert!(build_feature_table(&BTreeMap::new(), &[], 2)
            .unwrap()
            .is_empty());
        assert!(build_feature_table(&map, &[1], 2).is_err());
        assert!(build_feature_table(&map, &[9], 3).is_err());
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(3.0), "3");
        assert_eq!(format_g17(-1.0), "-1");
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(format_g17(2f64.sqrt()), "1.4142135623730951");
        assert_eq!(format_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(0.0), "0");
    }

    #[test]
    fn table_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gwf.csv");
        let rows = vec![
            summarize(&stats(&[1, 2, 7], 9, &[1, 2]), 3).unwrap(),
            fill_unreachable(10),
        ];
        write_feature_table(&path, &rows).unwrap();
        assert_eq!(read_feature_table(&path).unwrap(), rows);
    }
}
