use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use illicit_walk::pipeline::{
    extract_features, rank_walk_features, train_eval, with_workers, write_synthetic,
    ExtractOptions, TrainEvalOptions,
};
use illicit_walk::{
    load_graph, read_feature_table, write_feature_table, Error, FeatureSetSpec, LabelPolicy,
    Result, SynthConfig, TransactionGraph,
};

#[derive(Parser)]
#[command(
    name = "illicit-walk",
    version,
    about = "Distance-to-illicit walk features and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample walks from every labeled node and write the walk feature table.
    Extract(ExtractArgs),
    /// Train on the early time steps and evaluate on the rest.
    TrainEval(TrainEvalArgs),
    /// Rank walk features by permutation importance.
    Importance(ImportanceArgs),
    /// Generate a synthetic dataset in the three-file format.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    classes: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    AllPast,
    TrainOnly,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    common: Common,
    /// Successful walks per node.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    walks: u64,
    #[arg(long, value_enum, default_value = "all-past")]
    label_policy: PolicyArg,
    /// Last time step whose labels are visible under `train-only`.
    #[arg(long, default_value_t = 34)]
    train_cutoff: u32,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_attempts: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: Common,
    /// Walk feature table written by `extract`.
    #[arg(long)]
    gwf: Option<PathBuf>,
    /// af, gwf, af+gwf, af+gwf* or custom.
    #[arg(long, default_value = "af")]
    feature_set: String,
    /// Comma-separated column names for `--feature-set custom`.
    #[arg(long)]
    columns: Option<String>,
    #[arg(long, default_value_t = 34)]
    cutoff: u32,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    trees: u64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    max_split_features: u64,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args)]
struct TrainEvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// `time_step,f1` table.
    #[arg(long)]
    per_timestep: Option<PathBuf>,
    /// `threshold,fpr,tpr` table.
    #[arg(long)]
    roc: Option<PathBuf>,
    /// Save the trained forest.
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    /// Keep only the N best features in the printed selection.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    nodes: usize,
    #[arg(long, default_value_t = 49)]
    timesteps: u32,
    #[arg(long, default_value_t = 0.1)]
    illicit_frac: f64,
    #[arg(long, default_value_t = 0.5)]
    cluster_bias: f64,
    #[arg(long, default_value_t = 8)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    feature_signal: f64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn load(common: &Common) -> Result<TransactionGraph> {
    let graph = load_graph(&common.features, &common.classes, &common.edges)?;
    let report = graph.validate();
    if report.missing_labels > 0 {
        warn!(
            "{} nodes missing from the classes file, treated as unknown",
            report.missing_labels
        );
    }
    if !report.is_valid() {
        for v in report.violations.iter().take(10) {
            warn!("{v}");
        }
        return Err(Error::InvalidGraph(format!(
            "{} violations",
            report.violations.len()
        )));
    }
    info!(
        "loaded {} nodes, {} edges ({} illicit, {} licit, {} unknown)",
        report.node_count, report.edge_count, report.illicit, report.licit, report.unknown
    );
    Ok(graph)
}

fn workers(common: &Common) -> Option<usize> {
    common.workers.map(|w| w as usize)
}

fn feature_set(args: &ModelArgs) -> Result<FeatureSetSpec> {
    if args.feature_set.eq_ignore_ascii_case("custom") {
        let cols = args
            .columns
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("--feature-set custom needs --columns".into()))?;
        return Ok(FeatureSetSpec::Custom(
            cols.split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect(),
        ));
    }
    args.feature_set.parse().map_err(Error::InvalidConfig)
}

fn options(args: &ModelArgs) -> Result<TrainEvalOptions> {
    Ok(TrainEvalOptions {
        feature_set: feature_set(args)?,
        cutoff: args.cutoff,
        n_trees: args.trees as usize,
        max_split_features: args.max_split_features as usize,
        threshold: args.threshold,
        rng_seed: args.common.rng_seed,
    })
}

fn walk_rows(gwf: Option<&Path>, needed: bool) -> Result<Option<Vec<illicit_walk::GwFeatureRow>>> {
    match gwf {
        Some(path) => Ok(Some(read_feature_table(path)?)),
        None if needed => Err(Error::InvalidConfig("this feature set needs --gwf".into())),
        None => Ok(None),
    }
}

fn run_extract(args: ExtractArgs) -> Result<()> {
    let graph = load(&args.common)?;
    let opts = ExtractOptions {
        walks: args.walks as usize,
        policy: match args.label_policy {
            PolicyArg::AllPast => LabelPolicy::AllPastLabels,
            PolicyArg::TrainOnly => LabelPolicy::TrainOnlyLabels {
                cutoff_step: args.train_cutoff,
            },
        },
        max_attempts: args.max_attempts,
        rng_seed: args.common.rng_seed,
    };
    let (rows, summary) = with_workers(workers(&args.common), || extract_features(&graph, &opts))??;
    write_feature_table(&args.out, &rows)?;
    println!(
        "seeds {}  reachable {}  truncated {}  mean attempts {:.2}  wall time {:.2}s",
        summary.seeds,
        summary.reachable,
        summary.truncated,
        summary.mean_attempts,
        summary.elapsed.as_secs_f64()
    );
    Ok(())
}

fn run_train_eval(args: TrainEvalArgs) -> Result<()> {
    let common = &args.model.common;
    let opts = options(&args.model)?;
    let graph = load(common)?;
    let rows = walk_rows(
        args.model.gwf.as_deref(),
        opts.feature_set.needs_walk_features(graph.feature_dim()),
    )?;
    let out = with_workers(workers(common), || {
        train_eval(&graph, rows.as_deref(), &opts)
    })??;
    let r = &out.report;
    for w in &r.warnings {
        warn!("{w}");
    }
    println!(
        "{}: precision {:.4}  recall {:.4}  f1 {:.4}  micro-f1 {:.4}  auc {:.4}",
        opts.feature_set, r.precision_illicit, r.recall_illicit, r.f1_illicit, r.micro_f1, r.auc
    );
    if let Some(path) = &args.report {
        r.write_json(path)?;
    }
    if let Some(path) = &args.per_timestep {
        r.write_per_timestep_csv(path)?;
    }
    if let Some(path) = &args.roc {
        r.write_roc_csv(path)?;
    }
    if let Some(path) = &args.save_model {
        out.model.save(path)?;
    }
    Ok(())
}

fn run_importance(args: ImportanceArgs) -> Result<()> {
    let common = &args.model.common;
    let mut opts = options(&args.model)?;
    if args.model.feature_set == "af" {
        opts.feature_set = FeatureSetSpec::AfPlusGwf;
    }
    let graph = load(common)?;
    let rows = walk_rows(args.model.gwf.as_deref(), true)?.expect("walk rows");
    let report = with_workers(workers(common), || {
        rank_walk_features(&graph, &rows, &opts, args.repeats as usize)
    })??;
    report.write_csv(&args.out)?;
    let selected = match args.top {
        Some(n) => report.top(n),
        None => report.selected.clone(),
    };
    println!(
        "baseline f1 {:.4}  selected: {}",
        report.baseline_f1,
        selected.join(",")
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        n_nodes: args.nodes,
        n_timesteps: args.timesteps,
        illicit_fraction: args.illicit_frac,
        cluster_bias: args.cluster_bias,
        feature_dim: args.feature_dim,
        feature_signal: args.feature_signal,
        rng_seed: args.rng_seed,
    };
    let graph = write_synthetic(&config, &args.out_dir)?;
    let report = graph.validate();
    println!(
        "wrote {} nodes, {} edges ({} illicit) to {}",
        report.node_count,
        report.edge_count,
        report.illicit,
        args.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(args) => run_extract(args),
        Command::TrainEval(args) => run_train_eval(args),
        Command::Importance(args) => run_importance(args),
        Command::Synth(args) => run_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
