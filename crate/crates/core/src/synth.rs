//! Seeded synthetic scene-graph worlds.
//!
//! A world plants a Zipf-tilted `P(R | s, o)` table, a Zipf marginal over
//! object classes, a set of held-out compositions that never occur in
//! training, and Gaussian class embeddings from which node and edge features
//! are drawn.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::freq::{Triplet, TripletCounts};
use crate::graph::{dataset_stats, pair_at, pair_count, SceneGraph, StatsReport, ZeroShotCounts};
use crate::model::FeatureBundle;
use crate::{ClassId, Error, PredicateId, Result};

/// FG edge count as a function of graph size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityProfile {
    /// `round(N / 2)`, ties to even.
    Vg,
    /// `min(8N, N(N − 1))`.
    Gqa,
}

impl DensityProfile {
    pub fn fg_edges(&self, n: usize) -> usize {
        match self {
            DensityProfile::Vg => {
                let half = n / 2;
                (half + (n % 2 == 1 && half % 2 == 1) as usize).min(pair_count(n))
            }
            DensityProfile::Gqa => (8 * n).min(pair_count(n)),
        }
    }
}

/// Graph sizes `N = min + ⌊u^skew · (max − min + 1)⌋`, `u ~ U[0, 1)`.
/// `skew = 1` is uniform, larger values favour small graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeDistribution {
    pub min: usize,
    pub max: usize,
    pub skew: f64,
}

impl SizeDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let span = (self.max - self.min + 1) as f64;
        (self.min + (libm::pow(u, self.skew) * span) as usize).min(self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub c_obj: u32,
    pub c_pred: u32,
    pub density_profile: DensityProfile,
    pub n_distribution: SizeDistribution,
    pub zipf_exponent: f64,
    pub holdout_fraction: f64,
    pub feature_dim: usize,
    pub noise_scale: f64,
    /// Multiplier on the predicate / BG signal block of edge features.
    pub edge_signal: f64,
    /// Graphs with at least this many nodes draw predicates from rows raised
    /// to the power `large_graph_tempering` and renormalized. Values below 1
    /// flatten those rows, so tail compositions concentrate in large graphs.
    pub large_graph_min_nodes: usize,
    pub large_graph_tempering: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            c_obj: 20,
            c_pred: 12,
            density_profile: DensityProfile::Vg,
            n_distribution: SizeDistribution { min: 4, max: 24, skew: 1.0 },
            zipf_exponent: 1.0,
            holdout_fraction: 0.1,
            feature_dim: 16,
            noise_scale: 0.5,
            edge_signal: 1.0,
            large_graph_min_nodes: 11,
            large_graph_tempering: 1.0,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.c_obj < 2 || self.c_pred < 2 {
            return fail(format!("vocabulary sizes must be >= 2, got c_obj={} c_pred={}", self.c_obj, self.c_pred));
        }
        if !(0.0..=0.5).contains(&self.holdout_fraction) {
            return fail(format!("holdout_fraction must lie in [0, 0.5], got {}", self.holdout_fraction));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return fail(format!("noise_scale must be >= 0, got {}", self.noise_scale));
        }
        if !(self.edge_signal >= 0.0 && self.edge_signal.is_finite()) {
            return fail(format!("edge_signal must be >= 0, got {}", self.edge_signal));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return fail(format!("zipf_exponent must be >= 0, got {}", self.zipf_exponent));
        }
        if !(self.large_graph_tempering > 0.0 && self.large_graph_tempering <= 1.0) {
            return fail(format!("large_graph_tempering must lie in (0, 1], got {}", self.large_graph_tempering));
        }
        let n = &self.n_distribution;
        if n.min == 0 || n.min > n.max || !(n.skew > 0.0 && n.skew.is_finite()) {
            return fail(format!("bad size distribution {n:?}"));
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be >= 1".into());
        }
        Ok(())
    }

    pub fn node_dim(&self) -> usize {
        self.feature_dim
    }

    /// Subject block, object block, signal block.
    pub fn edge_dim(&self) -> usize {
        3 * self.feature_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Predicate samplers of one `(s, o)` row.
#[derive(Debug, Clone)]
struct RowSamplers {
    // [split][tempered]
    samplers: [[WeightedIndex<f64>; 2]; 2],
}

#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    class_weights: Vec<f64>,
    class_sampler: WeightedIndex<f64>,
    // row s * c_obj + o, slot 0 (BG) = 0
    planted: Vec<Vec<f64>>,
    rows: Vec<RowSamplers>,
    holdout: BTreeSet<Triplet>,
    object_embeddings: Vec<Vec<f64>>,
    predicate_embeddings: Vec<Vec<f64>>,
    bg_embedding: Vec<f64>,
}

fn zipf(len: usize, exponent: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=len).map(|r| libm::pow(r as f64, -exponent)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn sampler(weights: &[f64]) -> WeightedIndex<f64> {
    // every row keeps its top predicate, so some weight is positive
    WeightedIndex::new(weights.iter().copied()).expect("row has positive mass")
}

impl World {
    /// Deterministic in `cfg.seed`.
    pub fn new(cfg: WorldConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let c = cfg.c_obj as usize;
        let p = cfg.c_pred as usize;

        let mut class_order: Vec<usize> = (0..c).collect();
        class_order.shuffle(&mut rng);
        let ranked = zipf(c, cfg.zipf_exponent);
        let mut class_weights = vec![0.0; c];
        for (rank, &cls) in class_order.iter().enumerate() {
            class_weights[cls] = ranked[rank];
        }

        let tilt = zipf(p, cfg.zipf_exponent);
        let mut planted = Vec::with_capacity(c * c);
        let mut tops = Vec::with_capacity(c * c);
        for _ in 0..c * c {
            let mut order: Vec<usize> = (1..=p).collect();
            order.shuffle(&mut rng);
            let mut row = vec![0.0; p + 1];
            for (rank, &pred) in order.iter().enumerate() {
                row[pred] = tilt[rank];
            }
            tops.push(order[0]);
            planted.push(row);
        }

        let support = c * c * p;
        let requested = libm::round(cfg.holdout_fraction * support as f64) as usize;
        let candidates: Vec<Triplet> = (0..c * c)
            .flat_map(|row| {
                let (s, o) = ((row / c) as ClassId, (row % c) as ClassId);
                let top = tops[row];
                (1..=p)
                    .filter(move |&pred| pred != top)
                    .map(move |pred| Triplet::new(s, pred as PredicateId, o))
            })
            .collect();
        if requested > candidates.len() {
            return Err(Error::HoldoutInfeasible {
                requested,
                available: candidates.len(),
            });
        }
        let holdout: BTreeSet<Triplet> = index::sample(&mut rng, candidates.len(), requested)
            .into_iter()
            .map(|i| candidates[i])
            .collect();

        let rows = planted
            .iter()
            .enumerate()
            .map(|(row, dist)| {
                let (s, o) = ((row / c) as ClassId, (row % c) as ClassId);
                let train: Vec<f64> = dist
                    .iter()
                    .enumerate()
                    .map(|(pred, &w)| {
                        if holdout.contains(&Triplet::new(s, pred as PredicateId, o)) {
                            0.0
                        } else {
                            w
                        }
                    })
                    .collect();
                let temper = |w: &[f64]| -> Vec<f64> {
                    w.iter()
                        .map(|&v| if v > 0.0 { libm::pow(v, cfg.large_graph_tempering) } else { 0.0 })
                        .collect()
                };
                RowSamplers {
                    samplers: [
                        [sampler(&train), sampler(&temper(&train))],
                        [sampler(dist), sampler(&temper(dist))],
                    ],
                }
            })
            .collect();

        let d = cfg.feature_dim;
        let object_embeddings = (0..c).map(|_| gaussian(&mut rng, d, 1.0)).collect();
        let predicate_embeddings = (0..p).map(|_| gaussian(&mut rng, d, 1.0)).collect();
        let bg_embedding = gaussian(&mut rng, d, 1.0);

        Ok(Self {
            class_sampler: sampler(&class_weights),
            class_weights,
            planted,
            rows,
            holdout,
            object_embeddings,
            predicate_embeddings,
            bg_embedding,
            config: cfg,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    /// Planted `P(R | s, o)` indexed by predicate id; slot 0 is 0.
    pub fn planted(&self, subject: ClassId, object: ClassId) -> &[f64] {
        &self.planted[subject as usize * self.config.c_obj as usize + object as usize]
    }

    /// Marginal probability of each object class.
    pub fn class_weights(&self) -> &[f64] {
        &self.class_weights
    }

    pub fn holdout(&self) -> &BTreeSet<Triplet> {
        &self.holdout
    }

    pub fn object_embedding(&self, class: ClassId) -> &[f64] {
        &self.object_embeddings[class as usize]
    }

    /// Embedding of a predicate id; id 0 gives the BG signal vector.
    pub fn predicate_embedding(&self, predicate: PredicateId) -> &[f64] {
        match predicate {
            0 => &self.bg_embedding,
            p => &self.predicate_embeddings[p as usize - 1],
        }
    }

    /// One graph with its features. Train graphs never contain a held-out
    /// composition.
    pub fn sample_graph<R: Rng + ?Sized>(&self, rng: &mut R, split: Split, graph_id: impl Into<String>) -> (SceneGraph, FeatureBundle) {
        let cfg = &self.config;
        let c = cfg.c_obj as usize;
        let n = cfg.n_distribution.sample(rng);
        let nodes: Vec<ClassId> = (0..n).map(|_| self.class_sampler.sample(rng) as ClassId).collect();
        let m = cfg.density_profile.fg_edges(n);
        let mut picked = index::sample(rng, pair_count(n), m).into_vec();
        picked.sort_unstable();
        let tempered = (n >= cfg.large_graph_min_nodes) as usize;
        let split_idx = match split {
            Split::Train => 0,
            Split::Test => 1,
        };
        let edges: Vec<(usize, usize, PredicateId)> = picked
            .into_iter()
            .map(|k| {
                let (s, o) = pair_at(n, k);
                let row = nodes[s] as usize * c + nodes[o] as usize;
                let pred = self.rows[row].samplers[split_idx][tempered].sample(rng);
                (s, o, pred as PredicateId)
            })
            .collect();
        let graph_id = graph_id.into();
        // sampled edges are distinct, in range and never BG
        let graph = SceneGraph::new(graph_id.clone(), nodes, edges).expect("sampled graph is valid");

        let d = cfg.feature_dim;
        let noise = cfg.noise_scale;
        let mut node = Vec::with_capacity(n * d);
        for &cls in graph.nodes() {
            let e = self.object_embedding(cls);
            node.extend(e.iter().map(|v| v + noise * rng.sample::<f64, _>(StandardNormal)));
        }
        let mut edge = Vec::with_capacity(pair_count(n) * 3 * d);
        for (k, &label) in graph.pair_labels().iter().enumerate() {
            let (s, o) = pair_at(n, k);
            let blocks = [
                (self.object_embedding(graph.nodes()[s]), 1.0),
                (self.object_embedding(graph.nodes()[o]), 1.0),
                (self.predicate_embedding(label), cfg.edge_signal),
            ];
            for (e, scale) in blocks {
                edge.extend(e.iter().map(|v| scale * v + noise * rng.sample::<f64, _>(StandardNormal)));
            }
        }
        let feats = FeatureBundle::new(graph_id, n, d, 3 * d, node, edge).expect("feature shapes match");
        (graph, feats)
    }

    /// Generates both splits. When the world has held-out compositions and a
    /// test split is requested, the test split is redrawn until it contains
    /// at least one triplet unseen in training, at most `MAX_RETRIES` times.
    pub fn make_dataset(&self, train_images: usize, test_images: usize) -> Result<Dataset> {
        if train_images == 0 {
            return Err(Error::InvalidConfig("train_images must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1);
        let draw = |rng: &mut ChaCha8Rng, split: Split, count: usize, prefix: &str| {
            let mut graphs = Vec::with_capacity(count);
            let mut feats = Vec::with_capacity(count);
            for i in 0..count {
                let (g, f) = self.sample_graph(rng, split, format!("{prefix}-{i:06}"));
                graphs.push(g);
                feats.push(f);
            }
            (graphs, feats)
        };
        let (train, train_features) = draw(&mut rng, Split::Train, train_images, "train");
        let counts = TripletCounts::from_graphs(&train);
        let mut retries = 0;
        let (test, test_features) = loop {
            let drawn = draw(&mut rng, Split::Test, test_images, "test");
            let needs_zero_shot = test_images > 0 && !self.holdout.is_empty();
            if !needs_zero_shot || drawn.0.iter().flat_map(SceneGraph::triplets).any(|t| self.holdout.contains(&t)) {
                break drawn;
            }
            retries += 1;
            if retries > MAX_RETRIES {
                return Err(Error::RetryLimit(MAX_RETRIES));
            }
        };
        let train_stats = dataset_stats(&train, None)?;
        let test_stats = if test.is_empty() { None } else { Some(dataset_stats(&test, Some(&counts))?) };
        let held: Vec<Triplet> = test.iter().flat_map(SceneGraph::triplets).filter(|t| self.holdout.contains(t)).collect();
        let zero_shot = ZeroShotCounts {
            unique: held.iter().collect::<BTreeSet<_>>().len(),
            total: held.len(),
        };
        let manifest = Manifest {
            config: self.config.clone(),
            holdout: self.holdout.iter().copied().collect(),
            train_stats,
            test_stats,
            zero_shot,
            test_retries: retries,
        };
        Ok(Dataset {
            train,
            train_features,
            test,
            test_features,
            train_counts: counts,
            manifest,
        })
    }
}

/// Redraws of the test split allowed by [`World::make_dataset`].
pub const MAX_RETRIES: usize = 32;

/// Provenance of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: WorldConfig,
    pub holdout: Vec<Triplet>,
    pub train_stats: StatsReport,
    pub test_stats: Option<StatsReport>,
    /// Test triplets from held-out compositions. `test_stats` also counts
    /// compositions that are merely unsampled in training.
    pub zero_shot: ZeroShotCounts,
    pub test_retries: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<SceneGraph>,
    pub train_features: Vec<FeatureBundle>,
    pub test: Vec<SceneGraph>,
    pub test_features: Vec<FeatureBundle>,
    pub train_counts: TripletCounts,
    pub manifest: Manifest,
}
