//! Recall metrics for scene graph prediction.
//!
//! Image-level metrics (R@K, zero/n-shot R@K, mR@K) rank every non-background
//! triplet candidate of an image and look for ground-truth triplets among the
//! top K. Triplet-level metrics (R_tr@K, wR_tr@K) rank candidates per ground
//! truth pair only and pool all ground-truth triplets of the dataset.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::freq::{Triplet, TripletCounts};
use crate::graph::{pair_at, pair_count, pair_index, SceneGraph};
use crate::math::argmax;
use crate::model::Task;
use crate::{ClassId, Error, PredicateId, Result};

const SUM_TOLERANCE: f64 = 1e-6;

/// Model output for one image: a class distribution per node and a predicate
/// distribution (background at index 0) per ordered pair, pairs in canonical
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PredictionRecord", into = "PredictionRecord")]
pub struct Prediction {
    graph_id: String,
    node_probs: Vec<Vec<f64>>,
    pair_probs: Vec<Vec<f64>>,
}

/// One entry of a prediction file's `pair_probs` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProbs {
    pub s: usize,
    pub o: usize,
    pub probs: Vec<f64>,
}

/// Wire shape of a prediction-file line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub graph_id: String,
    pub node_probs: Vec<Vec<f64>>,
    pub pair_probs: Vec<PairProbs>,
}

fn check_distribution(graph_id: &str, what: &str, dist: &[f64]) -> Result<()> {
    let bad = |reason: String| Error::InvalidPrediction {
        graph_id: graph_id.to_string(),
        reason,
    };
    if dist.is_empty() {
        return Err(bad(format!("empty {what} distribution")));
    }
    if dist.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(bad(format!("{what} distribution has negative or non-finite entries")));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(bad(format!("{what} distribution sums to {sum}")));
    }
    Ok(())
}

impl Prediction {
    pub fn new(graph_id: impl Into<String>, node_probs: Vec<Vec<f64>>, pair_probs: Vec<Vec<f64>>) -> Result<Self> {
        let graph_id = graph_id.into();
        let n = node_probs.len();
        if n == 0 {
            return Err(Error::InvalidPrediction {
                graph_id,
                reason: "no nodes".into(),
            });
        }
        if pair_probs.len() != pair_count(n) {
            return Err(Error::InvalidPrediction {
                reason: format!("{} pair distributions for {n} nodes", pair_probs.len()),
                graph_id,
            });
        }
        for d in &node_probs {
            check_distribution(&graph_id, "node", d)?;
        }
        let width = pair_probs.first().map_or(0, Vec::len);
        for d in &pair_probs {
            check_distribution(&graph_id, "pair", d)?;
            if d.len() != width || width < 2 {
                return Err(Error::InvalidPrediction {
                    graph_id,
                    reason: "pair distributions need a common length >= 2".into(),
                });
            }
        }
        Ok(Self {
            graph_id,
            node_probs,
            pair_probs,
        })
    }

    pub fn graph_id(&self) -> &str {
        &self.graph_id
    }

    pub fn node_count(&self) -> usize {
        self.node_probs.len()
    }

    pub fn node_probs(&self) -> &[Vec<f64>] {
        &self.node_probs
    }

    /// Predicate distribution of the ordered pair `(s, o)`.
    pub fn pair(&self, s: usize, o: usize) -> &[f64] {
        &self.pair_probs[pair_index(self.node_count(), s, o)]
    }

    pub fn pair_probs(&self) -> &[Vec<f64>] {
        &self.pair_probs
    }

    fn check_graph(&self, graph: &SceneGraph) -> Result<()> {
        if self.graph_id != graph.graph_id() {
            return Err(Error::IdMismatch(format!(
                "prediction {} paired with graph {}",
                self.graph_id,
                graph.graph_id()
            )));
        }
        if self.node_count() != graph.node_count() {
            return Err(Error::InvalidPrediction {
                graph_id: self.graph_id.clone(),
                reason: format!("{} nodes predicted, graph has {}", self.node_count(), graph.node_count()),
            });
        }
        Ok(())
    }
}

impl TryFrom<PredictionRecord> for Prediction {
    type Error = Error;

    fn try_from(rec: PredictionRecord) -> Result<Self> {
        let n = rec.node_probs.len();
        let mut slots: Vec<Option<Vec<f64>>> = alloc::vec![None; pair_count(n)];
        for PairProbs { s, o, probs } in rec.pair_probs {
            if s >= n || o >= n || s == o {
                return Err(Error::InvalidPrediction {
                    graph_id: rec.graph_id,
                    reason: format!("pair ({s}, {o}) is not an ordered pair of {n} nodes"),
                });
            }
            let slot = &mut slots[pair_index(n, s, o)];
            if slot.is_some() {
                return Err(Error::InvalidPrediction {
                    graph_id: rec.graph_id,
                    reason: format!("pair ({s}, {o}) listed twice"),
                });
            }
            *slot = Some(probs);
        }
        let mut pair_probs = Vec::with_capacity(slots.len());
        for (k, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(p) => pair_probs.push(p),
                None => {
                    let (s, o) = pair_at(n, k);
                    return Err(Error::InvalidPrediction {
                        graph_id: rec.graph_id,
                        reason: format!("missing pair ({s}, {o})"),
                    });
                }
            }
        }
        Prediction::new(rec.graph_id, rec.node_probs, pair_probs)
    }
}

impl From<Prediction> for PredictionRecord {
    fn from(p: Prediction) -> Self {
        let n = p.node_count();
        PredictionRecord {
            graph_id: p.graph_id,
            node_probs: p.node_probs,
            pair_probs: p
                .pair_probs
                .into_iter()
                .enumerate()
                .map(|(k, probs)| {
                    let (s, o) = pair_at(n, k);
                    PairProbs { s, o, probs }
                })
                .collect(),
        }
    }
}

/// A scored triplet candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedTriplet {
    pub subject_node: usize,
    pub object_node: usize,
    pub subject_class: ClassId,
    pub predicate: PredicateId,
    pub object_class: ClassId,
    pub score: f64,
}

/// Node classes and their probabilities as used for ranking: ground truth
/// with probability 1 in PredCls, the argmax prediction in SGCls.
fn node_hypotheses(pred: &Prediction, graph: &SceneGraph, task: Task) -> Vec<(ClassId, f64)> {
    match task {
        Task::PredCls => graph.nodes().iter().map(|&c| (c, 1.0)).collect(),
        Task::SgCls => pred
            .node_probs
            .iter()
            .map(|d| {
                let c = argmax(d);
                (c as ClassId, d[c])
            })
            .collect(),
    }
}

/// Every non-background candidate of the image, best first.
///
/// Score is `subject_prob × predicate_prob × object_prob`. Constrained
/// ranking keeps only each pair's top non-background predicate. Ties are
/// broken by canonical pair index, then predicate id.
pub fn rank_triplets(pred: &Prediction, graph: &SceneGraph, constrained: bool, task: Task) -> Result<Vec<RankedTriplet>> {
    pred.check_graph(graph)?;
    let n = graph.node_count();
    let nodes = node_hypotheses(pred, graph, task);
    let mut out = Vec::new();
    let mut keyed = Vec::new();
    for (k, dist) in pred.pair_probs.iter().enumerate() {
        let (s, o) = pair_at(n, k);
        let (sc, sp) = nodes[s];
        let (oc, op) = nodes[o];
        let mut push = |p: usize| {
            keyed.push((k, out.len()));
            out.push(RankedTriplet {
                subject_node: s,
                object_node: o,
                subject_class: sc,
                predicate: p as PredicateId,
                object_class: oc,
                score: sp * dist[p] * op,
            });
        };
        if constrained {
            push(1 + argmax(&dist[1..]));
        } else {
            (1..dist.len()).for_each(&mut push);
        }
    }
    keyed.sort_by(|&(ka, ia), &(kb, ib)| {
        let (a, b) = (&out[ia], &out[ib]);
        b.score
            .total_cmp(&a.score)
            .then(ka.cmp(&kb))
            .then(a.predicate.cmp(&b.predicate))
    });
    Ok(keyed.into_iter().map(|(_, i)| out[i]).collect())
}

fn matches(c: &RankedTriplet, graph: &SceneGraph, subject: usize, object: usize, predicate: PredicateId) -> bool {
    c.subject_node == subject
        && c.object_node == object
        && c.predicate == predicate
        && c.subject_class == graph.nodes()[subject]
        && c.object_class == graph.nodes()[object]
}

/// `|Top_K ∩ GT| / |GT|` for one image, `None` when the image has no ground
/// truth (the image is skipped, not scored as zero).
pub fn image_recall_at_k(ranked: &[RankedTriplet], gt: &SceneGraph, k: usize) -> Option<f64> {
    if gt.fg_count() == 0 {
        return None;
    }
    let top = &ranked[..k.min(ranked.len())];
    let hits = gt
        .fg_edges()
        .iter()
        .filter(|e| top.iter().any(|c| matches(c, gt, e.subject, e.object, e.predicate)))
        .count();
    Some(hits as f64 / gt.fg_count() as f64)
}

/// 1-based position of every ground-truth edge in the image ranking.
fn gt_positions(ranked: &[RankedTriplet], gt: &SceneGraph) -> Vec<Option<usize>> {
    let n = gt.node_count();
    let mut by_pair: BTreeMap<(usize, PredicateId), usize> = BTreeMap::new();
    for (pos, c) in ranked.iter().enumerate() {
        if c.subject_class == gt.nodes()[c.subject_node] && c.object_class == gt.nodes()[c.object_node] {
            by_pair.entry((pair_index(n, c.subject_node, c.object_node), c.predicate)).or_insert(pos + 1);
        }
    }
    gt.fg_edges()
        .iter()
        .map(|e| by_pair.get(&(pair_index(n, e.subject, e.object), e.predicate)).copied())
        .collect()
}

/// Keeps only ground-truth triplets seen at most `n` times in training and
/// drops images left without any. `u64::MAX` keeps everything.
pub fn n_shot_filter(graphs: &[SceneGraph], counts: &TripletCounts, n: u64) -> Vec<SceneGraph> {
    graphs
        .iter()
        .map(|g| g.retain_edges(|e| counts.get(&g.triplet(e)) <= n))
        .filter(|g| g.fg_count() > 0)
        .collect()
}

/// Pairs every graph with its prediction by id.
fn align<'a>(preds: &'a [Prediction], graphs: &[SceneGraph]) -> Result<Vec<&'a Prediction>> {
    let mut by_id = BTreeMap::new();
    for p in preds {
        if by_id.insert(p.graph_id.as_str(), p).is_some() {
            return Err(Error::IdMismatch(format!("duplicate prediction for {}", p.graph_id)));
        }
    }
    graphs
        .iter()
        .map(|g| {
            let p = by_id
                .get(g.graph_id())
                .copied()
                .ok_or_else(|| Error::IdMismatch(format!("no prediction for graph {}", g.graph_id())))?;
            p.check_graph(g)?;
            Ok(p)
        })
        .collect()
}

/// Rank of the ground-truth triplet among all candidates on its own pair:
/// one plus the number of candidates with a strictly higher score.
fn pair_rank(pred: &Prediction, graph: &SceneGraph, subject: usize, object: usize, predicate: PredicateId, task: Task) -> Result<usize> {
    let dist = pred.pair(subject, object);
    let gp = predicate as usize;
    if gp >= dist.len() {
        return Err(Error::InvalidPrediction {
            graph_id: pred.graph_id.clone(),
            reason: format!("predicate {predicate} outside the predicted vocabulary"),
        });
    }
    match task {
        Task::PredCls => Ok(1 + dist[1..].iter().filter(|&&p| p > dist[gp]).count()),
        Task::SgCls => {
            let ps = &pred.node_probs[subject];
            let po = &pred.node_probs[object];
            let (gs, go) = (graph.nodes()[subject] as usize, graph.nodes()[object] as usize);
            if gs >= ps.len() || go >= po.len() {
                return Err(Error::InvalidPrediction {
                    graph_id: pred.graph_id.clone(),
                    reason: "ground-truth class outside the predicted vocabulary".into(),
                });
            }
            let target = ps[gs] * dist[gp] * po[go];
            let mut sorted_o = po.clone();
            sorted_o.sort_by(|a, b| b.total_cmp(a));
            let mut above = 0;
            for &s_prob in ps {
                for &p_prob in &dist[1..] {
                    let head = s_prob * p_prob;
                    // multiplication is monotone, so the candidates above
                    // `target` form a prefix of the descending object list
                    above += sorted_o.partition_point(|&x| head * x > target);
                }
            }
            Ok(1 + above)
        }
    }
}

/// Triplet-level ranks of every ground-truth triplet, pooled in graph order.
pub fn triplet_ranks(preds: &[Prediction], graphs: &[SceneGraph], task: Task) -> Result<Vec<(Triplet, usize)>> {
    let aligned = align(preds, graphs)?;
    let mut out = Vec::new();
    for (g, p) in graphs.iter().zip(aligned) {
        for e in g.fg_edges() {
            out.push((g.triplet(e), pair_rank(p, g, e.subject, e.object, e.predicate, task)?));
        }
    }
    Ok(out)
}

pub fn triplet_recall(preds: &[Prediction], graphs: &[SceneGraph], k: usize, task: Task) -> Result<f64> {
    let ranks = triplet_ranks(preds, graphs, task)?;
    if ranks.is_empty() {
        return Err(Error::Empty("ground-truth triplets"));
    }
    Ok(ranks.iter().filter(|(_, r)| *r <= k).count() as f64 / ranks.len() as f64)
}

/// `w_t = 1 / ((n_t + 1) Σ_t 1 / (n_t + 1))` for every listed test triplet.
pub fn triplet_weights<'a>(counts: &TripletCounts, triplets: impl IntoIterator<Item = &'a Triplet>) -> Vec<f64> {
    let raw: Vec<f64> = triplets
        .into_iter()
        .map(|t| 1.0 / (counts.get(t) as f64 + 1.0))
        .collect();
    let norm: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / norm).collect()
}

fn weighted_recall_from_ranks(ranks: &[(Triplet, usize)], counts: &TripletCounts, k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Empty("ground-truth triplets"));
    }
    let weights = triplet_weights(counts, ranks.iter().map(|(t, _)| t));
    Ok(ranks
        .iter()
        .zip(weights)
        .filter(|((_, r), _)| *r <= k)
        .map(|(_, w)| w)
        .sum())
}

/// Triplet recall with every test triplet weighted by `1 / (n_t + 1)`,
/// normalized over the whole pooled test set.
pub fn weighted_triplet_recall(preds: &[Prediction], graphs: &[SceneGraph], counts: &TripletCounts, k: usize, task: Task) -> Result<f64> {
    weighted_recall_from_ranks(&triplet_ranks(preds, graphs, task)?, counts, k)
}

/// Per-image ranking positions of every ground-truth edge.
fn image_positions(preds: &[Prediction], graphs: &[SceneGraph], constrained: bool, task: Task) -> Result<Vec<Vec<Option<usize>>>> {
    let aligned = align(preds, graphs)?;
    graphs
        .iter()
        .zip(aligned)
        .map(|(g, p)| Ok(gt_positions(&rank_triplets(p, g, constrained, task)?, g)))
        .collect()
}

/// Mean over images with ground truth of the image-level recall. Returns
/// `(value, images)`, `None` when no image has ground truth.
fn mean_image_recall(positions: &[Vec<Option<usize>>], k: usize) -> Option<(f64, usize)> {
    let per_image: Vec<f64> = positions
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| p.iter().filter(|x| x.is_some_and(|x| x <= k)).count() as f64 / p.len() as f64)
        .collect();
    if per_image.is_empty() {
        return None;
    }
    Some((per_image.iter().sum::<f64>() / per_image.len() as f64, per_image.len()))
}

/// Dataset R@K: mean of per-image recalls over images with ground truth.
pub fn recall_at_k(preds: &[Prediction], graphs: &[SceneGraph], k: usize, constrained: bool, task: Task) -> Result<f64> {
    mean_image_recall(&image_positions(preds, graphs, constrained, task)?, k)
        .map(|(v, _)| v)
        .ok_or(Error::Empty("ground-truth triplets"))
}

fn mean_recall_from_positions(graphs: &[SceneGraph], positions: &[Vec<Option<usize>>], k: usize) -> Option<(f64, usize)> {
    let mut per_class: BTreeMap<PredicateId, (usize, usize)> = BTreeMap::new();
    for (g, pos) in graphs.iter().zip(positions) {
        for (e, p) in g.fg_edges().iter().zip(pos) {
            let entry = per_class.entry(e.predicate).or_default();
            entry.1 += 1;
            entry.0 += p.is_some_and(|p| p <= k) as usize;
        }
    }
    if per_class.is_empty() {
        return None;
    }
    let sum: f64 = per_class.values().map(|&(hit, all)| hit as f64 / all as f64).sum();
    Some((sum / per_class.len() as f64, per_class.len()))
}

/// Macro average over predicate classes of the dataset-pooled image-level
/// recall restricted to that class.
pub fn mean_recall(preds: &[Prediction], graphs: &[SceneGraph], k: usize, constrained: bool, task: Task) -> Result<f64> {
    let positions = image_positions(preds, graphs, constrained, task)?;
    mean_recall_from_positions(graphs, &positions, k)
        .map(|(v, _)| v)
        .ok_or(Error::Empty("ground-truth triplets"))
}

/// Names used in [`MetricReport`] rows.
pub mod names {
    pub const RECALL: &str = "R";
    pub const RECALL_ZERO_SHOT: &str = "R_ZS";
    pub const RECALL_N_SHOT: &str = "R_nshot";
    pub const TRIPLET_RECALL: &str = "R_tr";
    pub const WEIGHTED_TRIPLET_RECALL: &str = "wR_tr";
    pub const MEAN_RECALL: &str = "mR";
    pub const CONSTRAINED: &str = "constrained";
    pub const UNCONSTRAINED: &str = "unconstrained";
    /// Variant of the per-pair triplet metrics, which have no graph constraint.
    pub const PAIR: &str = "pair";
}

pub fn variant_name(constrained: bool) -> &'static str {
    if constrained {
        names::CONSTRAINED
    } else {
        names::UNCONSTRAINED
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub variant: String,
    pub value: f64,
    /// Images, triplets or classes the value averages over.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub entries: Vec<MetricEntry>,
}

impl MetricReport {
    pub fn get(&self, metric: &str, k: usize, variant: &str) -> Option<f64> {
        self.entry(metric, k, variant).map(|e| e.value)
    }

    pub fn entry(&self, metric: &str, k: usize, variant: &str) -> Option<&MetricEntry> {
        self.entries
            .iter()
            .find(|e| e.metric == metric && e.k == k && e.variant == variant)
    }

    fn push(&mut self, metric: &str, k: usize, variant: String, (value, count): (f64, usize)) {
        self.entries.push(MetricEntry {
            metric: metric.into(),
            k,
            variant,
            value,
            count,
        });
    }
}

/// What [`recall_suite`] evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub task: Task,
    pub ks: Vec<usize>,
    /// Graph-constraint variants of the image-level metrics.
    pub constrained: Vec<bool>,
    /// Few-shot thresholds for the n-shot image-level recall.
    pub nshot: Vec<u64>,
}

impl SuiteConfig {
    pub fn new(task: Task, ks: Vec<usize>) -> Self {
        Self {
            task,
            ks,
            constrained: alloc::vec![false],
            nshot: Vec::new(),
        }
    }
}

/// Every metric at every K. Predictions and graphs must match one to one by
/// `graph_id`. Rows whose subset is empty (no zero-shot images, say) are left
/// out rather than reported as zero.
pub fn recall_suite(preds: &[Prediction], graphs: &[SceneGraph], counts: &TripletCounts, cfg: &SuiteConfig) -> Result<MetricReport> {
    if preds.len() != graphs.len() {
        return Err(Error::IdMismatch(format!(
            "{} predictions for {} graphs",
            preds.len(),
            graphs.len()
        )));
    }
    if cfg.ks.contains(&0) {
        return Err(Error::InvalidConfig("K must be >= 1".into()));
    }
    let mut report = MetricReport::default();
    let zero_shot = n_shot_filter(graphs, counts, 0);
    let few_shot: Vec<(u64, Vec<SceneGraph>)> = cfg.nshot.iter().map(|&n| (n, n_shot_filter(graphs, counts, n))).collect();
    for &constrained in &cfg.constrained {
        let variant = variant_name(constrained);
        let all = image_positions(preds, graphs, constrained, cfg.task)?;
        let zs = image_positions(preds, &zero_shot, constrained, cfg.task)?;
        let fs = few_shot
            .iter()
            .map(|(n, gs)| Ok((*n, image_positions(preds, gs, constrained, cfg.task)?)))
            .collect::<Result<Vec<_>>>()?;
        for &k in &cfg.ks {
            if let Some(v) = mean_image_recall(&all, k) {
                report.push(names::RECALL, k, variant.into(), v);
            }
            if let Some(v) = mean_image_recall(&zs, k) {
                report.push(names::RECALL_ZERO_SHOT, k, variant.into(), v);
            }
            for (n, pos) in &fs {
                if let Some(v) = mean_image_recall(pos, k) {
                    report.push(names::RECALL_N_SHOT, k, format!("{variant}:n={n}"), v);
                }
            }
            if let Some(v) = mean_recall_from_positions(graphs, &all, k) {
                report.push(names::MEAN_RECALL, k, variant.into(), v);
            }
        }
    }
    let ranks = triplet_ranks(preds, graphs, cfg.task)?;
    if !ranks.is_empty() {
        for &k in &cfg.ks {
            let hits = ranks.iter().filter(|(_, r)| *r <= k).count();
            report.push(names::TRIPLET_RECALL, k, names::PAIR.into(), (hits as f64 / ranks.len() as f64, ranks.len()));
            let w = weighted_recall_from_ranks(&ranks, counts, k)?;
            report.push(names::WEIGHTED_TRIPLET_RECALL, k, names::PAIR.into(), (w, ranks.len()));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one_pair_graph() -> SceneGraph {
        SceneGraph::new("g", vec![0, 1], [(0, 1, 1)]).unwrap()
    }

    fn one_pair_pred() -> Prediction {
        Prediction::new(
            "g",
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 0.7, 0.3], vec![1.0, 0.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn constrained_keeps_top_predicate() {
        let r = rank_triplets(&one_pair_pred(), &one_pair_graph(), true, Task::PredCls).unwrap();
        assert_eq!(r[0].predicate, 1);
        assert_eq!(r[0].score, 0.7);
        // the (1, 0) pair keeps its best non-BG predicate too
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn unconstrained_lists_every_predicate() {
        let r = rank_triplets(&one_pair_pred(), &one_pair_graph(), false, Task::PredCls).unwrap();
        let scores: Vec<f64> = r.iter().map(|c| c.score).collect();
        assert_eq!(scores, vec![0.7, 0.3, 0.0, 0.0]);
        assert_eq!((r[2].subject_node, r[2].predicate), (1, 1));
    }

    #[test]
    fn image_recall_examples() {
        let g = SceneGraph::new("g", vec![0, 1, 2], [(0, 1, 1), (1, 2, 2)]).unwrap();
        let mut pairs = vec![vec![1.0, 0.0, 0.0]; 6];
        pairs[pair_index(3, 0, 1)] = vec![0.0, 0.9, 0.1];
        pairs[pair_index(3, 1, 2)] = vec![0.0, 0.8, 0.2];
        let p = Prediction::new("g", vec![vec![1.0, 0.0, 0.0]; 3], pairs).unwrap();
        let r = rank_triplets(&p, &g, false, Task::PredCls).unwrap();
        assert_eq!(image_recall_at_k(&r, &g, 2), Some(0.5));
        assert_eq!(image_recall_at_k(&r, &g, 100), Some(1.0));
        let empty = SceneGraph::new("g", vec![0, 1, 2], []).unwrap();
        assert_eq!(image_recall_at_k(&r, &empty, 5), None);
    }

    #[test]
    fn predcls_triplet_rank() {
        let g = SceneGraph::new("g", vec![0, 1], [(0, 1, 3)]).unwrap();
        let p = Prediction::new(
            "g",
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.1, 0.4, 0.3, 0.2], vec![1.0, 0.0, 0.0, 0.0]],
        )
        .unwrap();
        let preds = [p];
        assert_eq!(triplet_ranks(&preds, core::slice::from_ref(&g), Task::PredCls).unwrap()[0].1, 3);
        assert_eq!(triplet_recall(&preds, core::slice::from_ref(&g), 2, Task::PredCls).unwrap(), 0.0);
        assert_eq!(triplet_recall(&preds, core::slice::from_ref(&g), 3, Task::PredCls).unwrap(), 1.0);
    }

    #[test]
    fn weighted_recall_worked_example() {
        // n_t = 0 for <0,1,0>, 1 for <1,2,2>, 9 for <3,1,4>
        let mut train: Vec<SceneGraph> = (0..9)
            .map(|i| SceneGraph::new(format!("b{i}"), vec![3, 4], [(0, 1, 1)]).unwrap())
            .collect();
        train.push(SceneGraph::new("a", vec![1, 2], [(0, 1, 2)]).unwrap());
        let counts_all = TripletCounts::from_graphs(&train);
        let ts = [Triplet::new(0, 1, 0), Triplet::new(1, 2, 2), Triplet::new(3, 1, 4)];
        assert_eq!(ts.iter().map(|t| counts_all.get(t)).collect::<Vec<_>>(), vec![0, 1, 9]);
        let w = triplet_weights(&counts_all, ts.iter());
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let ranks = vec![(ts[0], 1), (ts[1], 7), (ts[2], 9)];
        let wr = weighted_recall_from_ranks(&ranks, &counts_all, 5).unwrap();
        assert!((wr - 0.625).abs() < 1e-12);
        assert!((weighted_recall_from_ranks(&ranks, &counts_all, 9).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn n_shot_filter_examples() {
        let g = SceneGraph::new("g", vec![0, 1, 2], [(0, 1, 1), (1, 2, 2)]).unwrap();
        let counts = TripletCounts::from_graphs(core::slice::from_ref(&g));
        assert_eq!(n_shot_filter(core::slice::from_ref(&g), &counts, u64::MAX), vec![g.clone()]);
        assert!(n_shot_filter(core::slice::from_ref(&g), &counts, 0).is_empty());
        assert_eq!(n_shot_filter(core::slice::from_ref(&g), &counts, 1).len(), 1);
    }

    #[test]
    fn suite_averages_images_and_checks_ids() {
        let g1 = SceneGraph::new("a", vec![0, 1], [(0, 1, 1)]).unwrap();
        let g2 = SceneGraph::new("b", vec![0, 1], [(0, 1, 2)]).unwrap();
        let pred = |id: &str| {
            Prediction::new(
                id,
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]],
            )
            .unwrap()
        };
        let graphs = [g1, g2];
        let preds = [pred("a"), pred("b")];
        let counts = TripletCounts::default();
        let cfg = SuiteConfig {
            task: Task::PredCls,
            ks: vec![1],
            constrained: vec![false, true],
            nshot: vec![],
        };
        let report = recall_suite(&preds, &graphs, &counts, &cfg).unwrap();
        assert_eq!(report.get(names::RECALL, 1, names::UNCONSTRAINED), Some(0.5));
        assert_eq!(report.get(names::RECALL, 1, names::CONSTRAINED), Some(0.5));
        assert_eq!(report.get(names::MEAN_RECALL, 1, names::UNCONSTRAINED), Some(0.5));

        let wrong = [pred("a"), pred("c")];
        assert!(matches!(recall_suite(&wrong, &graphs, &counts, &cfg), Err(Error::IdMismatch(_))));
    }

    #[test]
    fn prediction_record_roundtrip_and_validation() {
        let p = one_pair_pred();
        let rec = PredictionRecord::from(p.clone());
        assert_eq!(Prediction::try_from(rec.clone()).unwrap(), p);
        let mut missing = rec.clone();
        missing.pair_probs.pop();
        assert!(Prediction::try_from(missing).is_err());
        assert!(Prediction::new("g", vec![vec![0.5, 0.4]], vec![]).is_err());
    }
}
