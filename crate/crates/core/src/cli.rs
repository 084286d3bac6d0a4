//! Command-line front end. `main` only forwards to [`main_with`].
//!
//! Settings are layered: built-in defaults (per subcommand), then the
//! `--config` file, then `--set key=value` overrides, then the named flags.
//! Reports go to the given writer as one JSON object per line; artifacts go
//! to the output directory.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::builder::{
    add_anchor_vertices, anchor_ids, build_cf_graph, build_knn_random, CandidateSet,
};
use crate::error::{Error, Result};
use crate::graph::{FinalGraph, GraphInit, StochasticGraph, VertexId};
use crate::io::{
    degree_stats, id_map_text, inspect_bytes, load_graph, load_interactions, load_vectors,
    save_graph, DataFormat, RunConfig, VectorFormat,
};
use crate::tasks::cf::{
    evaluate_cf, leave_one_out, synthetic_interactions, train_cf, CfSplit, EVAL_NEGATIVES,
};
use crate::tasks::compression::{
    compression_mse, reconstruct_graph, reconstruction_config, reconstruction_instances,
    train_compression, TargetDistances,
};
use crate::tasks::{anchor_embeddings, train_euclidean_baseline, EvalReport};
use crate::VectorDataset;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PROBGRAPH_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "probgraph",
    version,
    about = "Learn sparse weighted graphs whose shortest paths fit a task"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set lr=0.003`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Nearest-neighbour candidates per item.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Random candidates per item.
    #[arg(long, global = true)]
    r: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long = "batch-pairs", global = true)]
    batch_pairs: Option<usize>,
    #[arg(long, global = true)]
    negatives: Option<usize>,
    #[arg(long, global = true, value_parser = ["normal", "bipartite", "random"])]
    variant: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Vector dataset (CSV unless `data_format = raw`).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// `user item` interaction log; a synthetic one is generated otherwise.
    #[arg(long, global = true)]
    interactions: Option<PathBuf>,
    /// Input graph file.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[arg(long, global = true)]
    runs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build the candidate graph and save it with its initial weights.
    BuildGraph,
    /// Learn a graph reproducing the distances of a vector dataset.
    TrainCompress,
    /// Learn a user-item graph for top-k recommendation.
    TrainCf,
    /// Reconstruct random graphs from their distance matrices.
    ReconstructBench,
    /// Evaluate a saved graph on vectors (MSE) or interactions (hit ratio).
    Eval,
    /// Distances from every item to the anchor vertices.
    EmbedAnchors,
    /// Degree histogram and parameter accounting of a saved graph.
    Stats,
    /// Parameter-matched Euclidean embedding.
    BaselineEuclid,
}

/// Runs the CLI and returns the process exit status: 0 on success, 2 on a
/// usage error, 1 on a configuration, data or training error.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

/// Parses `args` (including the program name) and writes reports to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| Error::Config(e.to_string().lines().next().unwrap_or("").into()))?;
    execute(&cli, out)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    configure_threads()?;
    let cfg = resolve_config(cli)?;
    match cli.command {
        Command::BuildGraph => build_graph(&cfg, out),
        Command::TrainCompress => train_compress(&cfg, out),
        Command::TrainCf => train_cf_cmd(&cfg, out),
        Command::ReconstructBench => reconstruct_bench(&cfg, out),
        Command::Eval => eval(&cfg, out),
        Command::EmbedAnchors => embed_anchors(&cfg, out),
        Command::Stats => stats(&cfg, out),
        Command::BaselineEuclid => baseline(&cfg, out),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
    // A pool that already exists (repeated in-process runs) is kept.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if cli.command == Command::ReconstructBench {
        cfg.train = reconstruction_config();
    }
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for item in &cli.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {item:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    let t = &mut cfg.train;
    if let Some(v) = cli.seed {
        t.seed = v;
    }
    if let Some(v) = cli.lambda {
        t.lambda = v;
    }
    if let Some(v) = cli.epochs {
        t.epochs = v;
    }
    if let Some(v) = cli.batch_pairs {
        t.batch_pairs = v;
    }
    if let Some(v) = cli.negatives {
        t.n_negatives = v;
    }
    if let Some(v) = cli.k {
        cfg.k = v;
    }
    if let Some(v) = cli.r {
        cfg.r = v;
    }
    if let Some(v) = &cli.variant {
        cfg.variant = v.parse()?;
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &cli.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &cli.interactions {
        cfg.interactions = Some(v.clone());
    }
    if let Some(v) = &cli.graph {
        cfg.graph = Some(v.clone());
    }
    if let Some(v) = cli.runs {
        cfg.runs = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}")?;
    Ok(())
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out)?;
    Ok(&cfg.out)
}

/// Writes the report to `out` and appends it to `reports.jsonl`.
fn publish(cfg: &RunConfig, out: &mut dyn Write, line: &str) -> Result<()> {
    emit(out, line)?;
    let path = output_dir(cfg)?.join("reports.jsonl");
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(file, "{line}")?;
    Ok(())
}

fn save_run_config(cfg: &RunConfig) -> Result<()> {
    fs::write(output_dir(cfg)?.join("config.txt"), cfg.to_text())?;
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<VectorDataset> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --data".into()))?;
    let format = match cfg.data_format {
        DataFormat::Csv => VectorFormat::Csv,
        DataFormat::Raw => VectorFormat::RawF32 {
            n: cfg.raw_n,
            dim: cfg.raw_dim,
        },
    };
    let mut data = load_vectors(path, format).map_err(|e| with_path(e, path))?;
    if let Some(m) = cfg.max_items {
        data = data.head(m);
    }
    if cfg.normalize {
        data.normalize_mean_distance()?;
    }
    Ok(data)
}

fn vector_candidates(cfg: &RunConfig, data: &VectorDataset) -> Result<CandidateSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let candidates = build_knn_random(data, cfg.k, cfg.r, &mut rng)?;
    if cfg.anchors == 0 {
        return Ok(candidates);
    }
    add_anchor_vertices(
        &candidates,
        cfg.anchors,
        cfg.links_per_anchor.min(data.n_items()),
        &mut rng,
    )
}

fn load_split(cfg: &RunConfig) -> Result<CfSplit> {
    match &cfg.interactions {
        Some(path) => {
            let loaded = load_interactions(path).map_err(|e| with_path(e, path))?;
            let out = output_dir(cfg)?;
            fs::write(out.join("user_ids.txt"), id_map_text(&loaded.user_ids))?;
            fs::write(out.join("item_ids.txt"), id_map_text(&loaded.item_ids))?;
            leave_one_out(
                loaded.matrix.n_users(),
                loaded.matrix.n_items(),
                &loaded.events,
            )
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
            let events = synthetic_interactions(&cfg.synthetic, &mut rng)?;
            leave_one_out(cfg.synthetic.n_users, cfg.synthetic.n_items, &events)
        }
    }
}

fn input_graph(cfg: &RunConfig) -> Result<FinalGraph> {
    let path = cfg
        .graph
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --graph".into()))?;
    load_graph(path).map_err(|e| with_path(e, path))
}

/// Names the file in I/O errors.
fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    }
}

fn build_graph(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let (candidates, n_instances, task) = if cfg.data.is_some() {
        let data = load_dataset(cfg)?;
        (vector_candidates(cfg, &data)?, data.n_items(), "candidates")
    } else {
        let split = load_split(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
        let c = build_cf_graph(&split.train, cfg.variant, cfg.k_sim, &mut rng)?;
        let n = c.n_vertices;
        (c, n, "cf-candidates")
    };
    let init = GraphInit {
        d_max: cfg.train.d_max,
        ..GraphInit::default()
    };
    let model = StochasticGraph::new(
        candidates.n_vertices,
        &candidates.pairs,
        &candidates.init_weights,
        &init,
    )?;
    let graph = model.finalize();
    save_graph(&graph, output_dir(cfg)?.join("candidates.prdg"))?;
    save_run_config(cfg)?;
    let mut report = EvalReport::new(task, &graph, n_instances);
    report.candidate_edges = candidates.len();
    if cfg.data.is_none() {
        report.variant = Some(cfg.variant.to_string());
    }
    publish(cfg, out, &report.to_json_line())
}

fn train_compress(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let data = load_dataset(cfg)?;
    let candidates = vector_candidates(cfg, &data)?;
    let trained = train_compression(&data, &candidates, &cfg.train)?;
    save_graph(&trained.graph, output_dir(cfg)?.join("graph.prdg"))?;
    save_run_config(cfg)?;
    publish(cfg, out, &trained.report.to_json_line())
}

fn train_cf_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let split = load_split(cfg)?;
    let trained = train_cf(&split, cfg.variant, cfg.k_sim, &cfg.train)?;
    save_graph(&trained.graph, output_dir(cfg)?.join("graph.prdg"))?;
    save_run_config(cfg)?;
    publish(cfg, out, &trained.report.to_json_line())
}

fn reconstruct_bench(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let instances = reconstruction_instances(
        cfg.runs,
        cfg.er_min_vertices..=cfg.er_max_vertices,
        cfg.er_p,
        cfg.train.seed,
    )?;
    let (mut under_1e2, mut under_1e3) = (0, 0);
    let mut worst = 0.0f64;
    for (run, instance) in instances.iter().enumerate() {
        let config = crate::TrainConfig {
            seed: cfg.train.seed.wrapping_add(run as u64),
            ..cfg.train.clone()
        };
        let r = reconstruct_graph(instance, &config)?;
        under_1e2 += usize::from(r.max_error < 1e-2);
        under_1e3 += usize::from(r.max_error < 1e-3);
        worst = worst.max(r.max_error);
        let line = json!({
            "task": "reconstruction",
            "run": run,
            "n_vertices": instance.graph.n_vertices(),
            "truth_edges": instance.graph.n_edges(),
            "retained_edges": r.trained.graph.n_edges(),
            "max_error": r.max_error,
            "mean_error": r.mean_error,
            "edge_f1": r.edge_f1,
        });
        emit(out, &line.to_string())?;
    }
    let summary = json!({
        "task": "reconstruction-summary",
        "runs": cfg.runs,
        "max_error_below_1e-2": under_1e2,
        "max_error_below_1e-3": under_1e3,
        "worst_max_error": worst,
    });
    save_run_config(cfg)?;
    publish(cfg, out, &summary.to_string())
}

fn eval(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let graph = input_graph(cfg)?;
    let report = if cfg.data.is_some() {
        let data = load_dataset(cfg)?;
        let mut r = EvalReport::new("eval-compression", &graph, data.n_items());
        r.mse = Some(compression_mse(&graph, &TargetDistances::Vectors(&data))?);
        r
    } else {
        let split = load_split(cfg)?;
        let n_instances = split.n_users() + split.n_items();
        let e = evaluate_cf(&graph, &split, EVAL_NEGATIVES, cfg.train.seed)?;
        let mut r = EvalReport::new("eval-cf", &graph, n_instances);
        r.hr_at_5 = Some(e.hr_at_5);
        r.hr_at_10 = Some(e.hr_at_10);
        r
    };
    publish(cfg, out, &report.to_json_line())
}

fn embed_anchors(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let graph = input_graph(cfg)?;
    if cfg.anchors == 0 || cfg.anchors >= graph.n_vertices() {
        return Err(Error::Config(format!(
            "anchors must be in 1..{} for this graph, got {}",
            graph.n_vertices(),
            cfg.anchors
        )));
    }
    let anchors = anchor_ids(graph.n_vertices(), cfg.anchors);
    let items: Vec<VertexId> = (0..graph.n_vertices() - cfg.anchors)
        .map(VertexId::new)
        .collect();
    let rows = anchor_embeddings(&graph, &items, &anchors)?;
    let mut writer = csv::Writer::from_path(output_dir(cfg)?.join("anchor_embeddings.csv"))
        .map_err(csv_error)?;
    for row in &rows {
        writer
            .write_record(row.iter().map(|d| format!("{d}")))
            .map_err(csv_error)?;
    }
    writer.flush()?;
    let line =
        json!({ "task": "embed-anchors", "vertices": items.len(), "anchors": anchors.len() });
    publish(cfg, out, &line.to_string())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn stats(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let graph = input_graph(cfg)?;
    let path = cfg.graph.as_ref().expect("checked by input_graph");
    let summary = inspect_bytes(&fs::read(path)?)?;
    let degrees = degree_stats(&graph);
    for bin in degrees.bins() {
        emit(out, &serde_json::to_string(&bin).expect("serializable"))?;
    }
    let line = json!({
        "task": "stats",
        "n_vertices": summary.n_vertices,
        "n_edges": summary.n_edges,
        "index_entries": summary.index_entries,
        "body_numbers": summary.body_numbers,
        "param_count": summary.param_count(),
        "max_degree": degrees.max,
        "mean_degree": degrees.mean,
    });
    publish(cfg, out, &line.to_string())
}

fn baseline(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let data = load_dataset(cfg)?;
    let emb = train_euclidean_baseline(&data, cfg.baseline_dim, &cfg.train)?;
    let mut writer =
        csv::Writer::from_path(output_dir(cfg)?.join("embedding.csv")).map_err(csv_error)?;
    for i in 0..emb.n_items() {
        writer
            .write_record(emb.row(i).iter().map(|x| format!("{x}")))
            .map_err(csv_error)?;
    }
    writer.flush()?;
    let report = EvalReport {
        task: "baseline-euclid".into(),
        mse: Some(emb.mse),
        param_count: emb.param_count(),
        n_instances: data.n_items(),
        params_per_instance: emb.param_count() as f64 / data.n_items() as f64,
        steps: emb.steps,
        ..EvalReport::default()
    };
    save_run_config(cfg)?;
    publish(cfg, out, &report.to_json_line())
}
