//! The `sgg` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgg_core::graph::dataset_stats;
use sgg_core::metrics::SuiteConfig;
use sgg_core::model::EdgeSampling;
use sgg_core::synth::{DensityProfile, SizeDistribution};
use sgg_core::{LossConfig, MetricReport, Prediction, SceneGraph, Task, TrainConfig, TripletCounts, WorldConfig};

use crate::checkpoint::Checkpoint;
use crate::error::{LabError, Result};
use crate::pipeline::{self, DataDir, Predictor, TrainOptions};
use crate::{io, report};

#[derive(Debug, Parser)]
#[command(name = "sgg", version, about = "Scene-graph generation lab: synthetic data, edge-loss training and recall metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Gen(GenArgs),
    /// Train a linear node/edge classifier.
    Train(TrainArgs),
    /// Evaluate predictions, a checkpoint or the frequency baseline on the test split.
    Eval(EvalArgs),
    /// Dataset statistics.
    Stats(StatsArgs),
    /// Compare metric reports against the first one.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Vg,
    Gqa,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "vg")]
    pub profile: Profile,
    #[arg(long, default_value_t = 200)]
    pub train: usize,
    #[arg(long, default_value_t = 100)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of compositions held out of training.
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    #[arg(long, default_value_t = 1.0)]
    pub zipf: f64,
    #[arg(long, default_value_t = 20)]
    pub c_obj: u32,
    #[arg(long, default_value_t = 12)]
    pub c_pred: u32,
    #[arg(long, default_value_t = 4)]
    pub min_nodes: usize,
    #[arg(long, default_value_t = 24)]
    pub max_nodes: usize,
    /// Values above 1 favour small graphs.
    #[arg(long, default_value_t = 1.0)]
    pub size_skew: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub edge_signal: f64,
    #[arg(long, default_value_t = 11)]
    pub large_graph_min_nodes: usize,
    /// Exponent applied to predicate rows in large graphs (1 = none).
    #[arg(long, default_value_t = 1.0)]
    pub large_graph_tempering: f64,
}

impl GenArgs {
    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            c_obj: self.c_obj,
            c_pred: self.c_pred,
            density_profile: match self.profile {
                Profile::Vg => DensityProfile::Vg,
                Profile::Gqa => DensityProfile::Gqa,
            },
            n_distribution: SizeDistribution {
                min: self.min_nodes,
                max: self.max_nodes,
                skew: self.size_skew,
            },
            zipf_exponent: self.zipf,
            holdout_fraction: self.holdout,
            feature_dim: self.feature_dim,
            noise_scale: self.noise,
            edge_signal: self.edge_signal,
            large_graph_min_nodes: self.large_graph_min_nodes,
            large_graph_tempering: self.large_graph_tempering,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossName {
    Baseline,
    Normalized,
    TunedAb,
    TunedLambda,
}

/// `--loss` and its scalars.
#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, value_enum, default_value = "baseline")]
    pub loss: LossName,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

impl LossArgs {
    pub fn loss_config(&self) -> Result<LossConfig> {
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| LabError::Config(format!("--loss {} needs --{flag}", self.loss.to_possible_value().unwrap().get_name())));
        let cfg = match self.loss {
            LossName::Baseline => LossConfig::Baseline,
            LossName::Normalized => LossConfig::Normalized { gamma: self.gamma },
            LossName::TunedAb => LossConfig::TunedAb {
                alpha: need(self.alpha, "alpha")?,
                beta: need(self.beta, "beta")?,
            },
            LossName::TunedLambda => LossConfig::TunedLambda {
                lambda: need(self.lambda, "lambda")?,
            },
        };
        cfg.validate().map_err(crate::error::config)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Predcls,
    Sgcls,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Predcls => Task::PredCls,
            TaskArg::Sgcls => Task::SgCls,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

fn parse_edge_sample(s: &str) -> std::result::Result<EdgeSampling, String> {
    let (fg, bg) = s.split_once(':').ok_or("expected FG:BG, e.g. 32:256")?;
    let cap = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok(EdgeSampling { max_fg: cap(fg)?, max_bg: cap(bg)? })
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoint.json and history.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub loss: LossArgs,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    /// Graphs per batch.
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    /// Per-batch caps on sampled FG and BG edges.
    #[arg(long, value_name = "FG:BG", value_parser = parse_edge_sample)]
    pub edge_sample: Option<EdgeSampling>,
    #[arg(long, value_enum, default_value = "off")]
    pub freq_bias: Switch,
    /// Smoothing of the frequency bias.
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    #[arg(long, value_enum, default_value = "predcls")]
    pub task: TaskArg,
    #[arg(long)]
    pub min_nodes: Option<usize>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fail on batches without an edge term instead of training the node head only.
    #[arg(long)]
    pub strict_batches: bool,
    /// Skip per-epoch test-split metrics.
    #[arg(long)]
    pub no_validate: bool,
}

impl TrainArgs {
    pub fn options(&self) -> Result<TrainOptions> {
        let opts = TrainOptions {
            config: TrainConfig {
                loss: self.loss.loss_config()?,
                learning_rate: self.lr,
                epochs: self.epochs,
                batch_size: self.batch_size,
                edge_sampling: self.edge_sample,
                seed: self.seed,
                task: self.task.into(),
                skip_degenerate: !self.strict_batches,
            },
            freq_bias: (self.freq_bias == Switch::On).then_some(self.smoothing),
            min_nodes: self.min_nodes,
            max_nodes: self.max_nodes,
            validate: !self.no_validate,
        };
        opts.validate_options()?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorName {
    Freq,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["checkpoint", "predictions", "predictor"]))]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Prediction JSONL file.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorName>,
    /// Smoothing of the frequency predictor.
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    #[arg(long, value_enum, default_value = "predcls")]
    pub task: TaskArg,
    /// Also report graph-constrained image-level metrics.
    #[arg(long)]
    pub constrained: bool,
    /// Few-shot thresholds for R_nshot.
    #[arg(long, value_delimiter = ',')]
    pub nshot: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = [20, 50, 100])]
    pub k: Vec<usize>,
    /// Directory for metrics.csv and metrics.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the evaluated predictions as JSONL.
    #[arg(long)]
    pub save_predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["data", "graphs"]))]
pub struct StatsArgs {
    /// Dataset directory; reports train and test, zero-shot counts against train.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Graph JSONL files, one row each.
    #[arg(long, num_args = 1..)]
    pub graphs: Vec<PathBuf>,
    /// Training graphs used for zero-shot counts of `--graphs`.
    #[arg(long, requires = "graphs")]
    pub train: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metric CSV files written by `eval`; the first is the reference.
    #[arg(required = true, num_args = 2..)]
    pub runs: Vec<PathBuf>,
    /// Run names, in order (default: file paths).
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Missing inputs are configuration errors, not runtime failures.
fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(LabError::Config(format!("{} does not exist", path.display())))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Stats(a) => stats(&a),
        Command::Report(a) => compare(&a),
    }
}

fn gen(a: &GenArgs) -> Result<()> {
    let ds = pipeline::generate(a.world_config(), a.train, a.test)?;
    pipeline::write_dataset(&a.out, &ds)?;
    print!("{}", io::to_json_string(&ds.manifest));
    Ok(())
}

pub const CHECKPOINT: &str = "checkpoint.json";
pub const HISTORY: &str = "history.csv";

fn train(a: &TrainArgs) -> Result<()> {
    let opts = a.options()?;
    let data = DataDir::open(existing(&a.data)?)?;
    let (model, history) = pipeline::train(&data, &opts)?;
    std::fs::create_dir_all(&a.out).map_err(LabError::io(&a.out))?;
    io::write_json(&a.out.join(CHECKPOINT), &Checkpoint::new(&model, Some(opts.config)))?;
    io::write_text(&a.out.join(HISTORY), &report::history_csv(&history))?;
    print!("{}", report::history_csv(&history));
    Ok(())
}

pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";

fn eval(a: &EvalArgs) -> Result<()> {
    if a.k.is_empty() || a.k.contains(&0) {
        return Err(LabError::Config("--k values must be >= 1".into()));
    }
    let data = DataDir::open(existing(&a.data)?)?;
    let predictor = if let Some(path) = &a.checkpoint {
        Predictor::Model(io::read_json::<Checkpoint>(existing(path)?)?.model()?)
    } else if let Some(path) = &a.predictions {
        Predictor::Stored(io::read_jsonl::<Prediction>(existing(path)?)?)
    } else {
        if !(a.smoothing >= 0.0 && a.smoothing.is_finite()) {
            return Err(LabError::Config(format!("--smoothing must be >= 0, got {}", a.smoothing)));
        }
        Predictor::Freq(a.smoothing)
    };
    let task = a.task.into();
    let preds = pipeline::predict(&data, predictor, task)?;
    let mut suite = SuiteConfig::new(task, a.k.clone());
    if a.constrained {
        suite.constrained = vec![false, true];
    }
    suite.nshot = a.nshot.clone();
    let metrics = pipeline::evaluate(&data, &preds, &suite)?;
    if let Some(path) = &a.save_predictions {
        io::write_jsonl(path, &preds)?;
    }
    let csv = report::metrics_csv(&metrics);
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(LabError::io(dir))?;
        io::write_text(&dir.join(METRICS_CSV), &csv)?;
        io::write_json(&dir.join(METRICS_JSON), &metrics)?;
    }
    print!("{csv}");
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let mut rows = Vec::new();
    if let Some(dir) = &a.data {
        let data = DataDir::open(existing(dir)?)?;
        rows.push(("train".to_string(), dataset_stats(&data.train, None)?));
        if !data.test.is_empty() {
            rows.push(("test".to_string(), dataset_stats(&data.test, Some(&data.train_counts))?));
        }
    } else {
        let counts = a.train.as_ref().map(|p| io::read_jsonl::<SceneGraph>(existing(p)?).map(|g| TripletCounts::from_graphs(&g))).transpose()?;
        for path in &a.graphs {
            let graphs: Vec<SceneGraph> = io::read_jsonl(existing(path)?)?;
            rows.push((file_name(path), dataset_stats(&graphs, counts.as_ref())?));
        }
    }
    match a.format {
        Format::Text => print!("{}", report::stats_text(&rows)),
        Format::Csv => print!("{}", report::stats_csv(&rows)),
    }
    Ok(())
}

fn compare(a: &ReportArgs) -> Result<()> {
    if !a.names.is_empty() && a.names.len() != a.runs.len() {
        return Err(LabError::Config(format!("{} names for {} runs", a.names.len(), a.runs.len())));
    }
    let runs = a
        .runs
        .iter()
        .enumerate()
        .map(|(i, p)| Ok((a.names.get(i).cloned().unwrap_or_else(|| p.display().to_string()), report::read_metrics_csv(existing(p)?)?)))
        .collect::<Result<Vec<(String, MetricReport)>>>()?;
    let out = report::compare(&runs)?;
    match &a.out {
        Some(path) => io::write_text(path, &out)?,
        None => print!("{out}"),
    }
    Ok(())
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests print and exit 0, usage errors exit 2
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
