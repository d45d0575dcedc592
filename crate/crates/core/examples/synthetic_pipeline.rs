//! Full file-based pipeline: write a synthetic dataset, load it back,
//! extract walk features, then train and evaluate.

use illicit_walk::pipeline::{
    extract_features, synthetic_paths, train_eval, write_synthetic, ExtractOptions,
    TrainEvalOptions,
};
use illicit_walk::{
    load_graph, read_feature_table, write_feature_table, FeatureSetSpec, SynthConfig,
};

fn main() -> illicit_walk::Result<()> {
    let dir = std::env::temp_dir().join("illicit-walk-example");
    write_synthetic(
        &SynthConfig {
            n_nodes: 2000,
            cluster_bias: 0.8,
            ..Default::default()
        },
        &dir,
    )?;

    let (features, classes, edges) = synthetic_paths(&dir);
    let graph = load_graph(&features, &classes, &edges)?;
    let report = graph.validate();
    println!(
        "{} nodes, {} edges, {} illicit, {} licit",
        report.node_count, report.edge_count, report.illicit, report.licit
    );

    let (rows, summary) = extract_features(&graph, &ExtractOptions::default())?;
    println!(
        "{} seeds, {} reachable, {:.1} attempts per seed",
        summary.seeds, summary.reachable, summary.mean_attempts
    );
    let table = dir.join("gwf.csv");
    write_feature_table(&table, &rows)?;
    let rows = read_feature_table(&table)?;

    for set in [
        FeatureSetSpec::Af,
        FeatureSetSpec::Gwf,
        FeatureSetSpec::AfPlusGwf,
        FeatureSetSpec::AfPlusGwfStar,
    ] {
        let opts = TrainEvalOptions {
            feature_set: set.clone(),
            ..Default::default()
        };
        let r = train_eval(&graph, Some(&rows), &opts)?.report;
        println!(
            "{:<8} f1 {:.4}  micro-f1 {:.4}  auc {:.4}",
            set.to_string(),
            r.f1_illicit,
            r.micro_f1,
            r.auc
        );
    }
    println!("files in {}", dir.display());
    Ok(())
}
