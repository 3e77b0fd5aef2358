//! Linear node and edge classifiers trained with plain SGD.
//!
//! The node head maps a node feature vector to object-class logits. The edge
//! head maps an ordered-pair feature vector to `1 + C_pred` logits, column 0
//! being background. Optionally the log of a smoothed frequency prior
//! `P(R | subject class, object class)` is added to the non-background edge
//! logits before the softmax.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::freq::FreqModel;
use crate::graph::{pair_at, pair_count, pair_index, Batch, EdgeSet, PairRef, SceneGraph};
use crate::loss::{edge_terms, per_edge_weights, LossConfig, LossValue};
use crate::math::{argmax, cross_entropy, ln, softmax};
use crate::metrics::{self, Prediction};
use crate::{ClassId, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Predicate classification: object labels are given.
    #[serde(rename = "predcls")]
    PredCls,
    /// Scene graph classification: object labels are predicted too.
    #[serde(rename = "sgcls")]
    SgCls,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::PredCls => "predcls",
            Task::SgCls => "sgcls",
        }
    }
}

/// Per-node and per-ordered-pair feature vectors of one graph. Edge features
/// cover every ordered pair, in canonical pair order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureRecord", into = "FeatureRecord")]
pub struct FeatureBundle {
    graph_id: String,
    node_dim: usize,
    edge_dim: usize,
    node_count: usize,
    node: Vec<f64>,
    edge: Vec<f64>,
}

/// One entry of a feature file's `edge_features` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub s: usize,
    pub o: usize,
    pub features: Vec<f64>,
}

/// Wire shape of a feature-file line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub graph_id: String,
    pub node_features: Vec<Vec<f64>>,
    pub edge_features: Vec<PairFeatures>,
}

impl FeatureBundle {
    /// `node` holds `node_count × node_dim` values, `edge` holds
    /// `N(N−1) × edge_dim` values in canonical pair order.
    pub fn new(graph_id: impl Into<String>, node_count: usize, node_dim: usize, edge_dim: usize, node: Vec<f64>, edge: Vec<f64>) -> Result<Self> {
        if node.len() != node_count * node_dim {
            return Err(Error::DimensionMismatch {
                what: "node features",
                expected: node_count * node_dim,
                found: node.len(),
            });
        }
        if edge.len() != pair_count(node_count) * edge_dim {
            return Err(Error::DimensionMismatch {
                what: "edge features",
                expected: pair_count(node_count) * edge_dim,
                found: edge.len(),
            });
        }
        if node.iter().chain(edge.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("features must be finite".into()));
        }
        Ok(Self {
            graph_id: graph_id.into(),
            node_dim,
            edge_dim,
            node_count,
            node,
            edge,
        })
    }

    pub fn graph_id(&self) -> &str {
        &self.graph_id
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.node[i * self.node_dim..(i + 1) * self.node_dim]
    }

    pub fn edge(&self, s: usize, o: usize) -> &[f64] {
        let k = pair_index(self.node_count, s, o);
        &self.edge[k * self.edge_dim..(k + 1) * self.edge_dim]
    }
}

impl TryFrom<FeatureRecord> for FeatureBundle {
    type Error = Error;

    fn try_from(rec: FeatureRecord) -> Result<Self> {
        let n = rec.node_features.len();
        let node_dim = rec.node_features.first().map_or(0, Vec::len);
        let edge_dim = rec.edge_features.first().map_or(0, |e| e.features.len());
        if rec.node_features.iter().any(|f| f.len() != node_dim) {
            return Err(Error::InvalidConfig(format!("{}: ragged node features", rec.graph_id)));
        }
        let mut edge = vec![f64::NAN; pair_count(n) * edge_dim];
        let mut filled = vec![false; pair_count(n)];
        for PairFeatures { s, o, features } in rec.edge_features {
            if s >= n || o >= n || s == o || features.len() != edge_dim {
                return Err(Error::InvalidConfig(format!("{}: bad edge feature entry ({s}, {o})", rec.graph_id)));
            }
            let k = pair_index(n, s, o);
            if core::mem::replace(&mut filled[k], true) {
                return Err(Error::InvalidConfig(format!("{}: pair ({s}, {o}) listed twice", rec.graph_id)));
            }
            edge[k * edge_dim..(k + 1) * edge_dim].copy_from_slice(&features);
        }
        if let Some(k) = filled.iter().position(|f| !f) {
            let (s, o) = pair_at(n, k);
            return Err(Error::InvalidConfig(format!("{}: no features for pair ({s}, {o})", rec.graph_id)));
        }
        let node = rec.node_features.into_iter().flatten().collect();
        FeatureBundle::new(rec.graph_id, n, node_dim, edge_dim, node, edge)
    }
}

impl From<FeatureBundle> for FeatureRecord {
    fn from(f: FeatureBundle) -> Self {
        let n = f.node_count;
        FeatureRecord {
            node_features: (0..n).map(|i| f.node(i).to_vec()).collect(),
            edge_features: (0..pair_count(n))
                .map(|k| {
                    let (s, o) = pair_at(n, k);
                    PairFeatures {
                        s,
                        o,
                        features: f.edge(s, o).to_vec(),
                    }
                })
                .collect(),
            graph_id: f.graph_id,
        }
    }
}

/// Shapes of a [`ClassifierModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub node_dim: usize,
    pub edge_dim: usize,
    pub num_obj: usize,
    pub num_pred: usize,
}

impl ModelDims {
    fn edge_out(&self) -> usize {
        1 + self.num_pred
    }

    fn param_count(&self) -> usize {
        (self.node_dim + 1) * self.num_obj + (self.edge_dim + 1) * self.edge_out()
    }
}

/// Node and edge linear softmax heads.
///
/// Weight matrices are stored row-major with one row per input dimension:
/// `node_weights[d * num_obj + c]`, `edge_weights[d * (1 + num_pred) + r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    dims: ModelDims,
    node_weights: Vec<f64>,
    node_bias: Vec<f64>,
    edge_weights: Vec<f64>,
    edge_bias: Vec<f64>,
    freq_bias: Option<FreqModel>,
    // log P(r | s, o) for every (s, o), row (s * num_obj + o), length 1 + num_pred
    log_prior: Vec<f64>,
    seed: u64,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub node_weights: Vec<f64>,
    pub node_bias: Vec<f64>,
    pub edge_weights: Vec<f64>,
    pub edge_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros(dims: &ModelDims) -> Self {
        Self {
            node_weights: vec![0.0; dims.node_dim * dims.num_obj],
            node_bias: vec![0.0; dims.num_obj],
            edge_weights: vec![0.0; dims.edge_dim * dims.edge_out()],
            edge_bias: vec![0.0; dims.edge_out()],
        }
    }

    fn blocks(&self) -> [&[f64]; 4] {
        [&self.node_weights, &self.node_bias, &self.edge_weights, &self.edge_bias]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.node_weights, &mut self.node_bias, &mut self.edge_weights, &mut self.edge_bias]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entry `i` of the flattened parameter vector.
    pub fn get(&self, mut i: usize) -> f64 {
        for b in self.blocks() {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("gradient index out of range");
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks().into_iter().flat_map(|b| b.iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// Elementwise sum.
    pub fn add(&mut self, other: &Gradients) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }
}

impl ClassifierModel {
    /// Weights uniform in `[-0.01, 0.01]` from a generator seeded with `seed`,
    /// biases zero.
    pub fn new(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |len: usize| (0..len).map(|_| rng.random_range(-0.01..=0.01)).collect::<Vec<f64>>();
        let node_weights = init(dims.node_dim * dims.num_obj);
        let edge_weights = init(dims.edge_dim * dims.edge_out());
        Self {
            dims,
            node_weights,
            node_bias: vec![0.0; dims.num_obj],
            edge_weights,
            edge_bias: vec![0.0; dims.edge_out()],
            freq_bias: None,
            log_prior: Vec::new(),
            seed,
        }
    }

    /// Rebuilds a model from stored parameters.
    pub fn from_parts(dims: ModelDims, seed: u64, params: Gradients, freq_bias: Option<FreqModel>) -> Result<Self> {
        let expect = Gradients::zeros(&dims);
        for ((what, got), want) in ["node weights", "node bias", "edge weights", "edge bias"]
            .into_iter()
            .zip(params.blocks())
            .zip(expect.blocks())
        {
            if got.len() != want.len() {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: want.len(),
                    found: got.len(),
                });
            }
        }
        if !params.is_finite() {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        let model = Self {
            dims,
            node_weights: params.node_weights,
            node_bias: params.node_bias,
            edge_weights: params.edge_weights,
            edge_bias: params.edge_bias,
            freq_bias: None,
            log_prior: Vec::new(),
            seed,
        };
        match freq_bias {
            Some(f) => model.with_freq_bias(f),
            None => Ok(model),
        }
    }

    /// Adds `log P(r | s, o)` of `freq` to predicate logits. The prior must be
    /// smoothed so every logit stays finite.
    pub fn with_freq_bias(mut self, freq: FreqModel) -> Result<Self> {
        if freq.smoothing() <= 0.0 {
            return Err(Error::InvalidConfig("frequency bias needs smoothing > 0".into()));
        }
        if freq.num_predicates() as usize != self.dims.num_pred {
            return Err(Error::DimensionMismatch {
                what: "frequency model predicates",
                expected: self.dims.num_pred,
                found: freq.num_predicates() as usize,
            });
        }
        let c = self.dims.num_obj;
        let mut table = Vec::with_capacity(c * c * self.dims.edge_out());
        for s in 0..c as ClassId {
            for o in 0..c as ClassId {
                let dist = freq.predict(s, o)?;
                table.push(0.0);
                table.extend(dist[1..].iter().map(|p| ln(*p)));
            }
        }
        self.log_prior = table;
        self.freq_bias = Some(freq);
        Ok(self)
    }

    pub fn without_freq_bias(mut self) -> Self {
        self.freq_bias = None;
        self.log_prior.clear();
        self
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn freq_bias(&self) -> Option<&FreqModel> {
        self.freq_bias.as_ref()
    }

    /// Parameters in the [`Gradients`] layout.
    pub fn params(&self) -> Gradients {
        Gradients {
            node_weights: self.node_weights.clone(),
            node_bias: self.node_bias.clone(),
            edge_weights: self.edge_weights.clone(),
            edge_bias: self.edge_bias.clone(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.dims.param_count()
    }

    fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        for b in [&mut self.node_weights, &mut self.node_bias, &mut self.edge_weights, &mut self.edge_bias] {
            if i < b.len() {
                return &mut b[i];
            }
            i -= b.len();
        }
        panic!("parameter index out of range");
    }

    fn check_features(&self, graph: &SceneGraph, feats: &FeatureBundle) -> Result<()> {
        if graph.graph_id() != feats.graph_id() {
            return Err(Error::IdMismatch(format!(
                "features {} paired with graph {}",
                feats.graph_id(),
                graph.graph_id()
            )));
        }
        let checks = [
            ("node count", graph.node_count(), feats.node_count()),
            ("node feature dimension", self.dims.node_dim, feats.node_dim()),
            ("edge feature dimension", self.dims.edge_dim, feats.edge_dim()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch { what, expected, found });
            }
        }
        if let Some(&c) = graph.nodes().iter().find(|&&c| c as usize >= self.dims.num_obj) {
            return Err(Error::ClassOutOfRange {
                class: c,
                count: self.dims.num_obj as u32,
            });
        }
        if let Some(e) = graph.fg_edges().iter().find(|e| e.predicate as usize > self.dims.num_pred) {
            return Err(Error::PredicateOutOfRange {
                predicate: e.predicate,
                max: self.dims.num_pred as u32,
            });
        }
        Ok(())
    }

    fn node_logits(&self, x: &[f64]) -> Vec<f64> {
        affine(x, &self.node_weights, &self.node_bias)
    }

    fn edge_logits(&self, x: &[f64], s: ClassId, o: ClassId) -> Vec<f64> {
        let mut z = affine(x, &self.edge_weights, &self.edge_bias);
        if self.freq_bias.is_some() {
            let w = self.dims.edge_out();
            let row = (s as usize * self.dims.num_obj + o as usize) * w;
            z.iter_mut().zip(&self.log_prior[row..row + w]).for_each(|(z, b)| *z += b);
        }
        z
    }

    /// Classes the frequency prior is conditioned on: ground truth in
    /// PredCls, argmax node predictions in SGCls.
    fn conditioning_classes(&self, graph: &SceneGraph, feats: &FeatureBundle, task: Task) -> Vec<ClassId> {
        match task {
            Task::PredCls => graph.nodes().to_vec(),
            Task::SgCls => (0..graph.node_count())
                .map(|i| argmax(&self.node_logits(feats.node(i))) as ClassId)
                .collect(),
        }
    }

    /// Class distributions for every node and predicate distributions for
    /// every ordered pair. In PredCls the node distributions are one-hot on
    /// the ground-truth labels.
    pub fn forward(&self, graph: &SceneGraph, feats: &FeatureBundle, task: Task) -> Result<Prediction> {
        self.check_features(graph, feats)?;
        let n = graph.node_count();
        let node_probs = (0..n)
            .map(|i| match task {
                Task::PredCls => {
                    let mut p = vec![0.0; self.dims.num_obj];
                    p[graph.nodes()[i] as usize] = 1.0;
                    p
                }
                Task::SgCls => {
                    let mut p = self.node_logits(feats.node(i));
                    softmax(&mut p);
                    p
                }
            })
            .collect();
        let classes = self.conditioning_classes(graph, feats, task);
        let pair_probs = (0..pair_count(n))
            .map(|k| {
                let (s, o) = pair_at(n, k);
                let mut p = self.edge_logits(feats.edge(s, o), classes[s], classes[o]);
                softmax(&mut p);
                p
            })
            .collect();
        Prediction::new(graph.graph_id(), node_probs, pair_probs)
    }

    /// Mean node cross-entropy over the batch and its gradient.
    pub fn node_loss_and_gradients(&self, batch: &Batch, feats: &[&FeatureBundle]) -> Result<(f64, Gradients)> {
        self.check_batch(batch, feats)?;
        let mut grads = Gradients::zeros(&self.dims);
        let scale = 1.0 / batch.n_total() as f64;
        let mut total = 0.0;
        for (g, f) in batch.graphs().iter().zip(feats) {
            for (i, &label) in g.nodes().iter().enumerate() {
                let x = f.node(i);
                let z = self.node_logits(x);
                total += cross_entropy(&z, label as usize);
                accumulate(&mut grads.node_weights, &mut grads.node_bias, x, z, label as usize, scale);
            }
        }
        Ok((total * scale, grads))
    }

    fn check_batch(&self, batch: &Batch, feats: &[&FeatureBundle]) -> Result<()> {
        if feats.len() != batch.graphs().len() {
            return Err(Error::DimensionMismatch {
                what: "feature bundles",
                expected: batch.graphs().len(),
                found: feats.len(),
            });
        }
        batch
            .graphs()
            .iter()
            .zip(feats)
            .try_for_each(|(g, f)| self.check_features(g, f))
    }

    /// Loss over the batch nodes and the pairs of `edges` under `cfg`, with
    /// gradients of the total with respect to every parameter. Edge
    /// cross-entropies enter through [`per_edge_weights`].
    pub fn loss_and_gradients(&self, batch: &Batch, feats: &[&FeatureBundle], edges: &EdgeSet, cfg: &LossConfig, task: Task) -> Result<(LossValue, Gradients)> {
        let (l_node, mut grads) = self.node_loss_and_gradients(batch, feats)?;
        let weights = per_edge_weights(edges, cfg)?;
        let classes: Vec<Vec<ClassId>> = batch
            .graphs()
            .iter()
            .zip(feats)
            .map(|(g, f)| self.conditioning_classes(g, f, task))
            .collect();
        let mut losses = BTreeMap::new();
        for (pair, w) in weights.for_pairs(edges) {
            let f = feats.get(pair.graph).ok_or(Error::ExtraLoss(pair))?;
            let g = &batch.graphs()[pair.graph];
            if pair.subject >= g.node_count() || pair.object >= g.node_count() || pair.subject == pair.object {
                return Err(Error::ExtraLoss(pair));
            }
            let x = f.edge(pair.subject, pair.object);
            let cls = &classes[pair.graph];
            let z = self.edge_logits(x, cls[pair.subject], cls[pair.object]);
            let label = batch.label(&pair) as usize;
            losses.insert(pair, cross_entropy(&z, label));
            accumulate(&mut grads.edge_weights, &mut grads.edge_bias, x, z, label, w);
        }
        let terms = edge_terms(edges, &losses)?;
        Ok((cfg.evaluate(l_node, &terms)?, grads))
    }

    /// `params -= learning_rate * grads`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFiniteGradient);
        }
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {learning_rate}")));
        }
        if grads.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                what: "gradient length",
                expected: self.param_count(),
                found: grads.len(),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            *self.param_mut(i) -= learning_rate * g;
        }
        Ok(())
    }
}

fn affine(x: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut z = bias.to_vec();
    let width = bias.len();
    for (d, &xd) in x.iter().enumerate() {
        if xd != 0.0 {
            let row = &weights[d * width..(d + 1) * width];
            z.iter_mut().zip(row).for_each(|(z, w)| *z += xd * w);
        }
    }
    z
}

/// Adds `scale * ∂CE/∂(W, b)` for one example with logits `z`.
fn accumulate(gw: &mut [f64], gb: &mut [f64], x: &[f64], mut z: Vec<f64>, label: usize, scale: f64) {
    softmax(&mut z);
    z[label] -= 1.0;
    z.iter_mut().for_each(|v| *v *= scale);
    let width = z.len();
    for (d, &xd) in x.iter().enumerate() {
        if xd != 0.0 {
            let row = &mut gw[d * width..(d + 1) * width];
            row.iter_mut().zip(&z).for_each(|(g, dz)| *g += xd * dz);
        }
    }
    gb.iter_mut().zip(&z).for_each(|(g, dz)| *g += dz);
}

/// Uniform sample without replacement of at most `max_fg` FG edges and
/// `max_bg` BG pairs of the batch, kept in canonical order.
pub fn sample_edges(batch: &Batch, max_fg: usize, max_bg: usize, seed: u64) -> Result<EdgeSet> {
    if max_fg == 0 || max_bg == 0 {
        return Err(Error::InvalidConfig("edge sampling caps must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = batch.edges();
    let mut pick = |pairs: Vec<PairRef>, cap: usize| {
        if pairs.len() <= cap {
            return pairs;
        }
        let mut idx = index::sample(&mut rng, pairs.len(), cap).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pairs[i]).collect()
    };
    let fg = pick(all.fg, max_fg);
    let bg = pick(all.bg, max_bg);
    Ok(EdgeSet { fg, bg })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSampling {
    pub max_fg: usize,
    pub max_bg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Graphs per batch.
    pub batch_size: usize,
    pub edge_sampling: Option<EdgeSampling>,
    pub seed: u64,
    pub task: Task,
    /// Train only the node head on batches whose edge term is undefined
    /// (no pairs, or no FG edges under the normalized loss) instead of failing.
    pub skip_degenerate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::Baseline,
            learning_rate: 0.1,
            epochs: 10,
            batch_size: 8,
            edge_sampling: None,
            seed: 0,
            task: Task::PredCls,
            skip_degenerate: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if let Some(s) = self.edge_sampling {
            if s.max_fg == 0 || s.max_bg == 0 {
                return Err(Error::InvalidConfig("edge sampling caps must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationMetrics {
    pub recall_at_50: f64,
    pub triplet_recall_at_5: f64,
    pub node_accuracy: f64,
}

/// Per-epoch means over batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub l_node: f64,
    /// Edge statistics average over batches that had an edge term.
    pub l_fg: f64,
    pub l_bg: f64,
    pub d: f64,
    pub m_fg: f64,
    pub m_bg: f64,
    pub batches: usize,
    /// Batches trained on the node term only.
    pub skipped_edge_terms: usize,
    pub val: Option<ValidationMetrics>,
}

/// A dataset split: graphs and their aligned feature bundles.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a> {
    pub graphs: &'a [SceneGraph],
    pub feats: &'a [FeatureBundle],
}

impl<'a> Split<'a> {
    pub fn new(graphs: &'a [SceneGraph], feats: &'a [FeatureBundle]) -> Result<Self> {
        if graphs.len() != feats.len() {
            return Err(Error::DimensionMismatch {
                what: "feature bundles",
                expected: graphs.len(),
                found: feats.len(),
            });
        }
        Ok(Self { graphs, feats })
    }

    pub fn predict(&self, model: &ClassifierModel, task: Task) -> Result<Vec<Prediction>> {
        self.graphs
            .iter()
            .zip(self.feats)
            .map(|(g, f)| model.forward(g, f, task))
            .collect()
    }
}

fn validation_metrics(model: &ClassifierModel, val: &Split<'_>, task: Task) -> Result<ValidationMetrics> {
    let preds = val.predict(model, task)?;
    let mut correct = 0usize;
    let mut nodes = 0usize;
    for (g, f) in val.graphs.iter().zip(val.feats) {
        for (i, &c) in g.nodes().iter().enumerate() {
            correct += (argmax(&model.node_logits(f.node(i))) == c as usize) as usize;
            nodes += 1;
        }
    }
    let or_zero = |r: Result<f64>| match r {
        Err(Error::Empty(_)) => Ok(0.0),
        other => other,
    };
    Ok(ValidationMetrics {
        recall_at_50: or_zero(metrics::recall_at_k(&preds, val.graphs, 50, false, task))?,
        triplet_recall_at_5: or_zero(metrics::triplet_recall(&preds, val.graphs, 5, task))?,
        node_accuracy: if nodes == 0 { 0.0 } else { correct as f64 / nodes as f64 },
    })
}

/// Mini-batch SGD from `init`. Graph order is reshuffled every epoch from a
/// generator seeded with `cfg.seed`, so equal inputs give equal models.
pub fn train(init: ClassifierModel, data: Split<'_>, val: Option<Split<'_>>, cfg: &TrainConfig) -> Result<(ClassifierModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    let mut model = init;
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok((model, history));
    }
    if data.graphs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.graphs.len()).collect();
    for epoch in 0..cfg.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut sums = [0.0f64; 7];
        let (mut batches, mut with_edges, mut skipped) = (0usize, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = Batch::new(chunk.iter().map(|&i| data.graphs[i].clone()).collect())?;
            let feats: Vec<&FeatureBundle> = chunk.iter().map(|&i| &data.feats[i]).collect();
            let edges = match cfg.edge_sampling {
                Some(s) => sample_edges(&batch, s.max_fg, s.max_bg, rng.random())?,
                None => batch.edges(),
            };
            let grads = match model.loss_and_gradients(&batch, &feats, &edges, &cfg.loss, cfg.task) {
                Ok((value, grads)) => {
                    let t = value.edge_terms;
                    let row = [value.total, value.l_node, t.l_fg, t.l_bg, t.d, t.m_fg as f64, t.m_bg as f64];
                    sums.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                    with_edges += 1;
                    grads
                }
                Err(Error::DegenerateBatch | Error::UndefinedDensity) if cfg.skip_degenerate => {
                    let (l_node, grads) = model.node_loss_and_gradients(&batch, &feats)?;
                    sums[0] += l_node;
                    sums[1] += l_node;
                    skipped += 1;
                    grads
                }
                Err(e) => return Err(e),
            };
            model.sgd_step(&grads, cfg.learning_rate)?;
            batches += 1;
        }
        let per_edge = |v: f64| if with_edges == 0 { 0.0 } else { v / with_edges as f64 };
        let val_metrics = val.as_ref().map(|v| validation_metrics(&model, v, cfg.task)).transpose()?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            total: sums[0] / batches as f64,
            l_node: sums[1] / batches as f64,
            l_fg: per_edge(sums[2]),
            l_bg: per_edge(sums[3]),
            d: per_edge(sums[4]),
            m_fg: per_edge(sums[5]),
            m_bg: per_edge(sums[6]),
            batches,
            skipped_edge_terms: skipped,
            val: val_metrics,
        });
    }
    Ok((model, history))
}

/// Above this many parameters [`grad_check`] compares a seeded random subset.
pub const GRAD_CHECK_FULL_LIMIT: usize = 4096;
const GRAD_CHECK_SUBSET: usize = 1024;

/// Largest relative difference between `analytic` and central differences
/// of the total loss, `|a − n| / max(|a|, |n|, 1e-6)`.
#[allow(clippy::too_many_arguments)]
pub fn compare_gradients(
    model: &ClassifierModel,
    batch: &Batch,
    feats: &[&FeatureBundle],
    edges: &EdgeSet,
    cfg: &LossConfig,
    task: Task,
    analytic: &Gradients,
    epsilon: f64,
) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidConfig("epsilon must be > 0".into()));
    }
    let count = model.param_count();
    let indices: Vec<usize> = if count > GRAD_CHECK_FULL_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        let mut idx = index::sample(&mut rng, count, GRAD_CHECK_SUBSET).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..count).collect()
    };
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in indices {
        let original = *probe.param_mut(i);
        *probe.param_mut(i) = original + epsilon;
        let plus = probe.loss_and_gradients(batch, feats, edges, cfg, task)?.0.total;
        *probe.param_mut(i) = original - epsilon;
        let minus = probe.loss_and_gradients(batch, feats, edges, cfg, task)?.0.total;
        *probe.param_mut(i) = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic.get(i);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Central-difference check of [`ClassifierModel::loss_and_gradients`].
pub fn grad_check(model: &ClassifierModel, batch: &Batch, feats: &[&FeatureBundle], edges: &EdgeSet, cfg: &LossConfig, task: Task, epsilon: f64) -> Result<f64> {
    let (_, analytic) = model.loss_and_gradients(batch, feats, edges, cfg, task)?;
    compare_gradients(model, batch, feats, edges, cfg, task, &analytic, epsilon)
}
