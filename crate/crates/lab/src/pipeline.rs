//! Dataset directories and the gen / train / eval steps behind the CLI.

use std::fs;
use std::path::{Path, PathBuf};

use sgg_core::metrics::{self, SuiteConfig};
use sgg_core::model::{self, EpochRecord, ModelDims, Split};
use sgg_core::synth::{Dataset, Manifest};
use sgg_core::{ClassifierModel, FeatureBundle, FreqModel, MetricReport, Prediction, SceneGraph, Task, TrainConfig, TripletCounts, World, WorldConfig};

use crate::error::{config, LabError, Result};
use crate::io;

pub const TRAIN_GRAPHS: &str = "train.jsonl";
pub const TEST_GRAPHS: &str = "test.jsonl";
pub const TRAIN_FEATURES: &str = "train.features.jsonl";
pub const TEST_FEATURES: &str = "test.features.jsonl";
pub const MANIFEST: &str = "manifest.json";

pub fn generate(cfg: WorldConfig, train_images: usize, test_images: usize) -> Result<Dataset> {
    cfg.validate().map_err(config)?;
    if train_images == 0 {
        return Err(LabError::Config("--train must be >= 1".into()));
    }
    Ok(World::new(cfg)?.make_dataset(train_images, test_images)?)
}

/// Writes the graph, feature and manifest files of `ds` into `dir`.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(LabError::io(dir))?;
    io::write_jsonl(&dir.join(TRAIN_GRAPHS), &ds.train)?;
    io::write_jsonl(&dir.join(TEST_GRAPHS), &ds.test)?;
    io::write_jsonl(&dir.join(TRAIN_FEATURES), &ds.train_features)?;
    io::write_jsonl(&dir.join(TEST_FEATURES), &ds.test_features)?;
    io::write_json(&dir.join(MANIFEST), &ds.manifest)
}

/// A dataset directory read back from disk.
#[derive(Debug, Clone)]
pub struct DataDir {
    pub path: PathBuf,
    pub manifest: Manifest,
    pub train: Vec<SceneGraph>,
    pub test: Vec<SceneGraph>,
    pub train_counts: TripletCounts,
}

impl DataDir {
    pub fn open(path: &Path) -> Result<Self> {
        let manifest: Manifest = io::read_json(&path.join(MANIFEST))?;
        let train: Vec<SceneGraph> = io::read_jsonl(&path.join(TRAIN_GRAPHS))?;
        let test = io::read_jsonl(&path.join(TEST_GRAPHS))?;
        Ok(Self {
            path: path.to_path_buf(),
            manifest,
            train_counts: TripletCounts::from_graphs(&train),
            train,
            test,
        })
    }

    pub fn train_features(&self) -> Result<Vec<FeatureBundle>> {
        aligned_features(&self.path.join(TRAIN_FEATURES), &self.train)
    }

    pub fn test_features(&self) -> Result<Vec<FeatureBundle>> {
        aligned_features(&self.path.join(TEST_FEATURES), &self.test)
    }

    pub fn dims(&self) -> ModelDims {
        let w = &self.manifest.config;
        ModelDims {
            node_dim: w.node_dim(),
            edge_dim: w.edge_dim(),
            num_obj: w.c_obj as usize,
            num_pred: w.c_pred as usize,
        }
    }
}

fn aligned_features(path: &Path, graphs: &[SceneGraph]) -> Result<Vec<FeatureBundle>> {
    let feats: Vec<FeatureBundle> = io::read_jsonl(path)?;
    if feats.len() != graphs.len() {
        return Err(LabError::Schema(format!("{}: {} feature lines for {} graphs", path.display(), feats.len(), graphs.len())));
    }
    for (f, g) in feats.iter().zip(graphs) {
        if f.graph_id() != g.graph_id() {
            return Err(sgg_core::Error::IdMismatch(format!("features {} where graph {} was expected", f.graph_id(), g.graph_id())).into());
        }
    }
    Ok(feats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub config: TrainConfig,
    /// Smoothing of the frequency prior added to predicate logits, if any.
    pub freq_bias: Option<f64>,
    /// Keep only training graphs with this many nodes or more.
    pub min_nodes: Option<usize>,
    /// Keep only training graphs with at most this many nodes.
    pub max_nodes: Option<usize>,
    /// Record test-split metrics after every epoch.
    pub validate: bool,
}

impl TrainOptions {
    pub fn new(config: TrainConfig) -> Self {
        Self {
            config,
            freq_bias: None,
            min_nodes: None,
            max_nodes: None,
            validate: false,
        }
    }

    pub fn validate_options(&self) -> Result<()> {
        self.config.validate().map_err(config)?;
        if let Some(s) = self.freq_bias {
            if !(s > 0.0 && s.is_finite()) {
                return Err(LabError::Config(format!("frequency bias needs smoothing > 0, got {s}")));
            }
        }
        if let (Some(lo), Some(hi)) = (self.min_nodes, self.max_nodes) {
            if lo > hi {
                return Err(LabError::Config(format!("--min-nodes {lo} exceeds --max-nodes {hi}")));
            }
        }
        Ok(())
    }
}

/// Trains on the train split of `data`, restricted by the size filters.
pub fn train(data: &DataDir, opts: &TrainOptions) -> Result<(ClassifierModel, Vec<EpochRecord>)> {
    opts.validate_options()?;
    let features = data.train_features()?;
    let keep = |g: &SceneGraph| opts.min_nodes.is_none_or(|m| g.node_count() >= m) && opts.max_nodes.is_none_or(|m| g.node_count() <= m);
    let (graphs, feats): (Vec<SceneGraph>, Vec<FeatureBundle>) = data.train.iter().zip(features).filter(|(g, _)| keep(g)).map(|(g, f)| (g.clone(), f)).unzip();
    let mut init = ClassifierModel::new(data.dims(), opts.config.seed);
    if let Some(smoothing) = opts.freq_bias {
        init = init.with_freq_bias(FreqModel::fit(&graphs, data.manifest.config.c_pred, smoothing)?)?;
    }
    let test_features = if opts.validate { Some(data.test_features()?) } else { None };
    let val = test_features.as_ref().map(|f| Split::new(&data.test, f)).transpose()?;
    Ok(model::train(init, Split::new(&graphs, &feats)?, val, &opts.config)?)
}

/// Where test-split predictions come from.
#[derive(Debug, Clone)]
pub enum Predictor {
    Model(ClassifierModel),
    Stored(Vec<Prediction>),
    /// Frequency baseline fit on the train split with this smoothing.
    Freq(f64),
}

pub fn predict(data: &DataDir, predictor: Predictor, task: Task) -> Result<Vec<Prediction>> {
    match predictor {
        Predictor::Model(m) => {
            let feats = data.test_features()?;
            Ok(Split::new(&data.test, &feats)?.predict(&m, task)?)
        }
        Predictor::Stored(p) => Ok(p),
        Predictor::Freq(smoothing) => {
            if task != Task::PredCls {
                return Err(LabError::Config("the frequency predictor needs ground-truth labels (predcls)".into()));
            }
            let cfg = &data.manifest.config;
            let freq = FreqModel::fit(&data.train, cfg.c_pred, smoothing).map_err(config)?;
            Ok(freq.predictions(&data.test, cfg.c_obj)?)
        }
    }
}

pub fn evaluate(data: &DataDir, preds: &[Prediction], suite: &SuiteConfig) -> Result<MetricReport> {
    Ok(metrics::recall_suite(preds, &data.test, &data.train_counts, suite)?)
}
