//! Permutation importance of the walk features on a synthetic graph.

use illicit_walk::pipeline::{
    extract_features, generate_synthetic, rank_walk_features, ExtractOptions, TrainEvalOptions,
};
use illicit_walk::{FeatureSetSpec, SynthConfig};

fn main() -> illicit_walk::Result<()> {
    let graph = generate_synthetic(&SynthConfig {
        n_nodes: 3000,
        cluster_bias: 0.9,
        ..Default::default()
    })?;
    let (rows, _) = extract_features(&graph, &ExtractOptions::default())?;
    let opts = TrainEvalOptions {
        feature_set: FeatureSetSpec::AfPlusGwf,
        ..Default::default()
    };
    let report = rank_walk_features(&graph, &rows, &opts, 5)?;
    println!("baseline f1 {:.4}", report.baseline_f1);
    for (rank, f) in report.features.iter().enumerate() {
        println!(
            "{:>2} {:<8} {:+.4} (std {:.4})",
            rank + 1,
            f.name,
            f.mean_f1_drop,
            f.std_over_repeats
        );
    }
    println!("top five: {}", report.top(5).join(","));
    Ok(())
}
