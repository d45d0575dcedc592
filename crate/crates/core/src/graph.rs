//! Temporal transaction graph: loading, validation, adjacency, and the
//! time-based train/test split.
//!
//! Edges point from an older transaction to a newer one. Walks travel
//! against the edge direction, so the graph keeps a precomputed list of
//! incoming neighbors for every node. Node ids from the input files are
//! remapped to dense indices; the original ids are kept for all I/O.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeLabel {
    Illicit,
    Licit,
    Unknown,
}

impl NodeLabel {
    /// Token used by the classes file.
    pub fn token(self) -> &'static str {
        match self {
            NodeLabel::Illicit => "1",
            NodeLabel::Licit => "2",
            NodeLabel::Unknown => "unknown",
        }
    }

    pub fn is_labeled(self) -> bool {
        self != NodeLabel::Unknown
    }
}

impl FromStr for NodeLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "1" => Ok(NodeLabel::Illicit),
            "2" => Ok(NodeLabel::Licit),
            "unknown" => Ok(NodeLabel::Unknown),
            other => Err(format!(
                "invalid class `{other}` (expected 1, 2 or unknown)"
            )),
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One transaction. `features[0]` is the time step, as in the on-disk format.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: u64,
    pub time_step: u32,
    pub label: NodeLabel,
    pub features: Vec<f64>,
}

impl Node {
    /// Builds a node whose feature vector is `[time_step, rest...]`.
    pub fn new(
        id: u64,
        time_step: u32,
        label: NodeLabel,
        rest: impl IntoIterator<Item = f64>,
    ) -> Self {
        let mut features = vec![f64::from(time_step)];
        features.extend(rest);
        Node {
            id,
            time_step,
            label,
            features,
        }
    }
}

/// Immutable temporal DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionGraph {
    ids: Vec<u64>,
    time_steps: Vec<u32>,
    labels: Vec<NodeLabel>,
    features: Vec<f64>,
    feature_dim: usize,
    index: HashMap<u64, usize>,
    edges: Vec<(u32, u32)>,
    pred_offsets: Vec<usize>,
    preds: Vec<u32>,
    succ_offsets: Vec<usize>,
    succs: Vec<u32>,
    missing_labels: usize,
}

impl TransactionGraph {
    /// Builds a graph from nodes and `(src_id, dst_id)` edges, rejecting
    /// cycles.
    pub fn from_parts(nodes: Vec<Node>, edges: &[(u64, u64)]) -> Result<Self> {
        let graph = Self::from_parts_unvalidated(nodes, edges)?;
        if graph.topological_order().is_none() {
            return Err(Error::Cyclic);
        }
        Ok(graph)
    }

    /// Like [`from_parts`](Self::from_parts) but accepts cyclic input, so that
    /// [`validate`](Self::validate) can report on it. Walks over a cyclic
    /// graph are not guaranteed to terminate.
    pub fn from_parts_unvalidated(nodes: Vec<Node>, edges: &[(u64, u64)]) -> Result<Self> {
        let n = nodes.len();
        let feature_dim = nodes.first().map_or(1, |node| node.features.len());
        if feature_dim == 0 {
            return Err(Error::InvalidGraph(
                "nodes need at least one feature (the time step)".into(),
            ));
        }
        let mut ids = Vec::with_capacity(n);
        let mut time_steps = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut features = Vec::with_capacity(n * feature_dim);
        let mut index = HashMap::with_capacity(n);
        for node in nodes {
            if node.features.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    got: node.features.len(),
                });
            }
            if node.features[0] != f64::from(node.time_step) {
                return Err(Error::InvalidGraph(format!(
                    "node {}: first feature {} differs from time step {}",
                    node.id, node.features[0], node.time_step
                )));
            }
            if node.time_step == 0 {
                return Err(Error::InvalidGraph(format!(
                    "node {}: time steps start at 1",
                    node.id
                )));
            }
            if index.insert(node.id, ids.len()).is_some() {
                return Err(Error::DuplicateNode(node.id));
            }
            ids.push(node.id);
            time_steps.push(node.time_step);
            labels.push(node.label);
            features.extend_from_slice(&node.features);
        }
        let mut dense = Vec::with_capacity(edges.len());
        for &(src, dst) in edges {
            let s = *index.get(&src).ok_or(Error::UnknownNode(src))?;
            let d = *index.get(&dst).ok_or(Error::UnknownNode(dst))?;
            dense.push((s as u32, d as u32));
        }

        let (pred_offsets, mut preds) = csr(n, dense.iter().map(|&(s, d)| (d, s)));
        let (succ_offsets, mut succs) = csr(n, dense.iter().copied());
        for v in 0..n {
            preds[pred_offsets[v]..pred_offsets[v + 1]].sort_unstable_by_key(|&u| ids[u as usize]);
            succs[succ_offsets[v]..succ_offsets[v + 1]].sort_unstable_by_key(|&u| ids[u as usize]);
        }

        Ok(TransactionGraph {
            ids,
            time_steps,
            labels,
            features,
            feature_dim,
            index,
            edges: dense,
            pred_offsets,
            preds,
            succ_offsets,
            succs,
            missing_labels: 0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Width of every feature vector (time step included).
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn max_time_step(&self) -> u32 {
        self.time_steps.iter().copied().max().unwrap_or(0)
    }

    /// Number of nodes that had no row in the classes file.
    pub fn missing_labels(&self) -> usize {
        self.missing_labels
    }

    pub fn index_of(&self, id: u64) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub fn id(&self, idx: usize) -> u64 {
        self.ids[idx]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn time_step(&self, idx: usize) -> u32 {
        self.time_steps[idx]
    }

    pub fn label(&self, idx: usize) -> NodeLabel {
        self.labels[idx]
    }

    pub fn features(&self, idx: usize) -> &[f64] {
        &self.features[idx * self.feature_dim..(idx + 1) * self.feature_dim]
    }

    pub fn node(&self, idx: usize) -> Node {
        Node {
            id: self.ids[idx],
            time_step: self.time_steps[idx],
            label: self.labels[idx],
            features: self.features(idx).to_vec(),
        }
    }

    /// Edges as `(src_id, dst_id)`, in input order.
    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.edges
            .iter()
            .map(|&(s, d)| (self.ids[s as usize], self.ids[d as usize]))
    }

    /// Incoming neighbors of `idx` as dense indices, ascending by node id.
    pub fn predecessor_indices(&self, idx: usize) -> &[u32] {
        &self.preds[self.pred_offsets[idx]..self.pred_offsets[idx + 1]]
    }

    /// Outgoing neighbors of `idx` as dense indices, ascending by node id.
    pub fn successor_indices(&self, idx: usize) -> &[u32] {
        &self.succs[self.succ_offsets[idx]..self.succ_offsets[idx + 1]]
    }

    /// Ids of the incoming neighbors of `id`, ascending.
    pub fn predecessors(&self, id: u64) -> Result<Vec<u64>> {
        let idx = self.index_of(id)?;
        Ok(self
            .predecessor_indices(idx)
            .iter()
            .map(|&u| self.ids[u as usize])
            .collect())
    }

    /// Kahn's algorithm; `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.node_count();
        let mut indegree: Vec<usize> = (0..n).map(|v| self.predecessor_indices(v).len()).collect();
        let mut order: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in self.successor_indices(v) {
                let w = w as usize;
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    order.push(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport {
            node_count: self.node_count(),
            edge_count: self.edge_count(),
            missing_labels: self.missing_labels,
            is_dag: self.topological_order().is_some(),
            ..Default::default()
        };
        for &label in &self.labels {
            match label {
                NodeLabel::Illicit => report.illicit += 1,
                NodeLabel::Licit => report.licit += 1,
                NodeLabel::Unknown => report.unknown += 1,
            }
        }
        let mut seen = HashSet::with_capacity(self.edges.len());
        for &(s, d) in &self.edges {
            let (src, dst) = (self.ids[s as usize], self.ids[d as usize]);
            if s == d {
                report.self_loops.push(src);
            }
            if !seen.insert((s, d)) {
                report.duplicate_edges.push((src, dst));
            }
            if self.time_steps[s as usize] > self.time_steps[d as usize] {
                report.temporal_violations.push((src, dst));
            }
        }
        if !report.is_dag {
            report.violations.push("graph contains a cycle".to_string());
        }
        for id in &report.self_loops {
            report.violations.push(format!("self-loop on node {id}"));
        }
        for (s, d) in &report.duplicate_edges {
            report.violations.push(format!("duplicate edge {s} -> {d}"));
        }
        for (s, d) in &report.temporal_violations {
            report
                .violations
                .push(format!("edge {s} -> {d} points backward in time"));
        }
        report
    }

    /// Partitions labeled nodes by time step: `<= cutoff` trains, `> cutoff` tests.
    pub fn temporal_split(&self, cutoff_step: u32) -> Result<TemporalSplit> {
        let max = self.max_time_step();
        if cutoff_step < 1 || cutoff_step >= max {
            return Err(Error::InvalidConfig(format!(
                "cutoff step {cutoff_step} outside 1..{max}"
            )));
        }
        let mut train_ids = Vec::new();
        let mut test_ids = Vec::new();
        for idx in 0..self.node_count() {
            if !self.labels[idx].is_labeled() {
                continue;
            }
            if self.time_steps[idx] <= cutoff_step {
                train_ids.push(self.ids[idx]);
            } else {
                test_ids.push(self.ids[idx]);
            }
        }
        train_ids.sort_unstable();
        test_ids.sort_unstable();
        Ok(TemporalSplit {
            cutoff_step,
            train_ids,
            test_ids,
        })
    }

    /// Ids of all labeled (licit or illicit) nodes, ascending.
    pub fn labeled_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = (0..self.node_count())
            .filter(|&i| self.labels[i].is_labeled())
            .map(|i| self.ids[i])
            .collect();
        ids.sort_unstable();
        ids
    }
}

fn csr(n: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for (from, _) in pairs.clone() {
        offsets[from as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut targets = vec![0u32; offsets[n]];
    for (from, to) in pairs {
        targets[fill[from as usize]] = to;
        fill[from as usize] += 1;
    }
    (offsets, targets)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub node_count: usize,
    pub edge_count: usize,
    pub illicit: usize,
    pub licit: usize,
    pub unknown: usize,
    /// Nodes absent from the classes file (defaulted to unknown). A warning,
    /// not a violation.
    pub missing_labels: usize,
    pub is_dag: bool,
    pub self_loops: Vec<u64>,
    pub duplicate_edges: Vec<(u64, u64)>,
    pub temporal_violations: Vec<(u64, u64)>,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalSplit {
    pub cutoff_step: u32,
    /// Labeled ids with time step `<= cutoff_step`, ascending.
    pub train_ids: Vec<u64>,
    /// Labeled ids with time step `> cutoff_step`, ascending.
    pub test_ids: Vec<u64>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_id(path: &Path, line: u64, field: &str) -> Result<u64> {
    field
        .parse::<u64>()
        .map_err(|_| Error::malformed(path, line, format!("invalid node id `{field}`")))
}

/// Loads the three-file dataset format.
///
/// * features: headerless, `id,f1,...,fF` with `f1` the time step
/// * classes: header `txId,class`, class in `1` (illicit), `2` (licit), `unknown`
/// * edges: header `txId1,txId2`, oriented older to newer
///
/// Nodes missing from the classes file are labeled unknown. Cyclic graphs
/// are rejected.
pub fn load_graph(
    features_path: &Path,
    classes_path: &Path,
    edges_path: &Path,
) -> Result<TransactionGraph> {
    let mut nodes = Vec::new();
    let mut width = None;
    for record in csv_reader(features_path, false)?.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() < 2 {
            return Err(Error::malformed(
                features_path,
                line,
                "expected an id and at least one feature",
            ));
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::malformed(
                features_path,
                line,
                format!("expected {expected} columns, found {}", record.len()),
            ));
        }
        let id = parse_id(features_path, line, &record[0])?;
        let mut features = Vec::with_capacity(record.len() - 1);
        for field in record.iter().skip(1) {
            let value: f64 = field.parse().map_err(|_| {
                Error::malformed(
                    features_path,
                    line,
                    format!("non-numeric feature `{field}`"),
                )
            })?;
            if !value.is_finite() {
                return Err(Error::malformed(
                    features_path,
                    line,
                    format!("non-finite feature `{field}`"),
                ));
            }
            features.push(value);
        }
        let step = features[0];
        if step < 1.0 || step.fract() != 0.0 || step > f64::from(u32::MAX) {
            return Err(Error::malformed(
                features_path,
                line,
                format!("invalid time step `{}`", &record[1]),
            ));
        }
        nodes.push(Node {
            id,
            time_step: step as u32,
            label: NodeLabel::Unknown,
            features,
        });
    }

    let position: HashMap<u64, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    if position.len() != nodes.len() {
        let mut seen = HashSet::new();
        let dup = nodes
            .iter()
            .find(|n| !seen.insert(n.id))
            .map(|n| n.id)
            .unwrap_or_default();
        return Err(Error::DuplicateNode(dup));
    }

    let mut labeled = vec![false; nodes.len()];
    for record in csv_reader(classes_path, true)?.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(Error::malformed(
                classes_path,
                line,
                "expected `txId,class`",
            ));
        }
        let id = parse_id(classes_path, line, &record[0])?;
        let label: NodeLabel = record[1]
            .parse()
            .map_err(|msg: String| Error::malformed(classes_path, line, msg))?;
        let &i = position.get(&id).ok_or(Error::UnknownNode(id))?;
        nodes[i].label = label;
        labeled[i] = true;
    }
    let missing_labels = labeled.iter().filter(|&&l| !l).count();

    let mut edges = Vec::new();
    for record in csv_reader(edges_path, true)?.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(Error::malformed(edges_path, line, "expected `txId1,txId2`"));
        }
        edges.push((
            parse_id(edges_path, line, &record[0])?,
            parse_id(edges_path, line, &record[1])?,
        ));
    }

    let mut graph = TransactionGraph::from_parts(nodes, &edges)?;
    graph.missing_labels = missing_labels;
    Ok(graph)
}

/// Writes `graph` in the format read by [`load_graph`]. Every node gets a
/// classes row, so unknown labels are written explicitly.
pub fn write_graph(
    graph: &TransactionGraph,
    features_path: &Path,
    classes_path: &Path,
    edges_path: &Path,
) -> Result<()> {
    let create = |path: &Path| -> Result<BufWriter<File>> {
        Ok(BufWriter::new(
            File::create(path).map_err(|e| Error::io(path, e))?,
        ))
    };

    let mut out = create(features_path)?;
    let mut line = String::new();
    for idx in 0..graph.node_count() {
        line.clear();
        line.push_str(&graph.id(idx).to_string());
        for v in graph.features(idx) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())
            .map_err(|e| Error::io(features_path, e))?;
    }
    out.flush().map_err(|e| Error::io(features_path, e))?;

    let mut out = create(classes_path)?;
    writeln!(out, "txId,class").map_err(|e| Error::io(classes_path, e))?;
    for idx in 0..graph.node_count() {
        writeln!(out, "{},{}", graph.id(idx), graph.label(idx))
            .map_err(|e| Error::io(classes_path, e))?;
    }
    out.flush().map_err(|e| Error::io(classes_path, e))?;

    let mut out = create(edges_path)?;
    writeln!(out, "txId1,txId2").map_err(|e| Error::io(edges_path, e))?;
    for (s, d) in graph.edges() {
        writeln!(out, "{s},{d}").map_err(|e| Error::io(edges_path, e))?;
    }
    out.flush().map_err(|e| Error::io(edges_path, e))?;
    Ok(())
}
