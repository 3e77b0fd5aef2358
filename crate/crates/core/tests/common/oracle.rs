//! Exhaustive-enumeration reference implementations of the recall metrics,
//! written directly from the definitions and sharing no code with the crate.

#![allow(dead_code)]

use rand::Rng;
use sgg_core::metrics::{self, names, SuiteConfig};
use sgg_core::{Prediction, SceneGraph, Task, Triplet, TripletCounts};

pub struct Instance {
    pub graphs: Vec<SceneGraph>,
    pub preds: Vec<Prediction>,
    pub counts: TripletCounts,
    pub c_obj: u32,
    pub c_pred: u32,
}

/// Weights from a tiny alphabet so exact score ties are common.
fn coarse_dist<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..len).map(|_| rng.random_range(0..4) as f64).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.into_iter().map(|v| v / total).collect();
        }
    }
}

fn random_graph<R: Rng>(rng: &mut R, id: String, c_obj: u32, c_pred: u32) -> SceneGraph {
    let n = rng.random_range(1..=4usize);
    let nodes = (0..n).map(|_| rng.random_range(0..c_obj)).collect();
    let mut edges = Vec::new();
    for s in 0..n {
        for o in 0..n {
            if s != o && rng.random_bool(0.4) {
                edges.push((s, o, rng.random_range(1..=c_pred)));
            }
        }
    }
    SceneGraph::new(id, nodes, edges).unwrap()
}

/// ≤ 4 nodes, ≤ 4 object classes, ≤ 3 predicates.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let c_obj = rng.random_range(1..=4u32);
    let c_pred = rng.random_range(1..=3u32);
    let images = rng.random_range(1..=4usize);
    let graphs: Vec<SceneGraph> = (0..images).map(|i| random_graph(rng, format!("t{i}"), c_obj, c_pred)).collect();
    let train: Vec<SceneGraph> = (0..rng.random_range(0..=6usize))
        .map(|i| random_graph(rng, format!("r{i}"), c_obj, c_pred))
        .collect();
    let preds = graphs
        .iter()
        .map(|g| {
            let n = g.node_count();
            let nodes = (0..n).map(|_| coarse_dist(rng, c_obj as usize)).collect();
            let pairs = (0..n * n.saturating_sub(1)).map(|_| coarse_dist(rng, c_pred as usize + 1)).collect();
            Prediction::new(g.graph_id(), nodes, pairs).unwrap()
        })
        .collect();
    Instance {
        graphs,
        preds,
        counts: TripletCounts::from_graphs(&train),
        c_obj,
        c_pred,
    }
}

fn first_max(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

struct Candidate {
    s: usize,
    o: usize,
    sc: u32,
    p: u32,
    oc: u32,
    score: f64,
    order: usize,
}

fn candidates(pred: &Prediction, g: &SceneGraph, constrained: bool, task: Task) -> Vec<Candidate> {
    let n = g.node_count();
    let node = |i: usize| match task {
        Task::PredCls => (g.nodes()[i], 1.0),
        Task::SgCls => {
            let d = &pred.node_probs()[i];
            let c = first_max(d);
            (c as u32, d[c])
        }
    };
    let mut out = Vec::new();
    let mut order = 0;
    for s in 0..n {
        for o in 0..n {
            if s == o {
                continue;
            }
            let dist = pred.pair(s, o);
            let (sc, sp) = node(s);
            let (oc, op) = node(o);
            for p in 1..dist.len() {
                if constrained && p != 1 + first_max(&dist[1..]) {
                    continue;
                }
                out.push(Candidate {
                    s,
                    o,
                    sc,
                    p: p as u32,
                    oc,
                    score: sp * dist[p] * op,
                    order,
                });
            }
            order += 1;
        }
    }
    out
}

/// Whether GT edge `(s, o, p)` lands in the top K of the image ranking.
fn image_hit(cands: &[Candidate], g: &SceneGraph, s: usize, o: usize, p: u32, k: usize) -> bool {
    let Some(gt) = cands
        .iter()
        .find(|c| c.s == s && c.o == o && c.p == p && c.sc == g.nodes()[s] && c.oc == g.nodes()[o])
    else {
        return false;
    };
    let ahead = cands
        .iter()
        .filter(|c| {
            c.score > gt.score || (c.score == gt.score && (c.order < gt.order || (c.order == gt.order && c.p < gt.p)))
        })
        .count();
    ahead < k
}

/// Per-image hit lists, restricted to GT triplets passing `keep`.
fn image_hits(inst: &Instance, k: usize, constrained: bool, task: Task, keep: &dyn Fn(&Triplet) -> bool) -> Vec<Vec<(u32, bool)>> {
    inst.graphs
        .iter()
        .zip(&inst.preds)
        .map(|(g, pred)| {
            let cands = candidates(pred, g, constrained, task);
            g.fg_edges()
                .iter()
                .filter(|e| keep(&g.triplet(e)))
                .map(|e| (e.predicate, image_hit(&cands, g, e.subject, e.object, e.predicate, k)))
                .collect()
        })
        .collect()
}

pub fn recall(inst: &Instance, k: usize, constrained: bool, task: Task, max_shots: Option<u64>) -> Option<f64> {
    let keep = |t: &Triplet| max_shots.is_none_or(|n| inst.counts.get(t) <= n);
    let per_image: Vec<f64> = image_hits(inst, k, constrained, task, &keep)
        .into_iter()
        .filter(|h| !h.is_empty())
        .map(|h| h.iter().filter(|x| x.1).count() as f64 / h.len() as f64)
        .collect();
    (!per_image.is_empty()).then(|| per_image.iter().sum::<f64>() / per_image.len() as f64)
}

pub fn mean_recall(inst: &Instance, k: usize, constrained: bool, task: Task) -> Option<f64> {
    let hits: Vec<(u32, bool)> = image_hits(inst, k, constrained, task, &|_| true).into_iter().flatten().collect();
    let mut ratios = Vec::new();
    for p in 1..=inst.c_pred {
        let of: Vec<bool> = hits.iter().filter(|h| h.0 == p).map(|h| h.1).collect();
        if !of.is_empty() {
            ratios.push(of.iter().filter(|&&b| b).count() as f64 / of.len() as f64);
        }
    }
    (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// `(triplet, rank among every class×predicate×class hypothesis on its pair)`.
fn triplet_ranks(inst: &Instance, task: Task) -> Vec<(Triplet, usize)> {
    let mut out = Vec::new();
    for (g, pred) in inst.graphs.iter().zip(&inst.preds) {
        for e in g.fg_edges() {
            let dist = pred.pair(e.subject, e.object);
            let gp = e.predicate as usize;
            let rank = match task {
                Task::PredCls => 1 + (1..dist.len()).filter(|&p| dist[p] > dist[gp]).count(),
                Task::SgCls => {
                    let ps = &pred.node_probs()[e.subject];
                    let po = &pred.node_probs()[e.object];
                    let target = ps[g.nodes()[e.subject] as usize] * dist[gp] * po[g.nodes()[e.object] as usize];
                    let mut above = 0;
                    for a in ps {
                        for p in &dist[1..] {
                            for b in po {
                                if a * p * b > target {
                                    above += 1;
                                }
                            }
                        }
                    }
                    1 + above
                }
            };
            out.push((g.triplet(e), rank));
        }
    }
    out
}

pub fn triplet_recall(inst: &Instance, k: usize, task: Task) -> Option<f64> {
    let ranks = triplet_ranks(inst, task);
    (!ranks.is_empty()).then(|| ranks.iter().filter(|r| r.1 <= k).count() as f64 / ranks.len() as f64)
}

pub fn weighted_triplet_recall(inst: &Instance, k: usize, task: Task) -> Option<f64> {
    let ranks = triplet_ranks(inst, task);
    if ranks.is_empty() {
        return None;
    }
    let raw: Vec<f64> = ranks.iter().map(|(t, _)| 1.0 / (inst.counts.get(t) as f64 + 1.0)).collect();
    let norm: f64 = raw.iter().sum();
    Some(ranks.iter().zip(&raw).filter(|(r, _)| r.1 <= k).map(|(_, w)| w / norm).sum())
}

pub const KS: [usize; 6] = [1, 2, 3, 5, 10, 50];

/// Compares every library metric with the oracle; returns the first
/// disagreement.
pub fn check(inst: &Instance) -> Result<(), String> {
    let ok = |r: sgg_core::Result<f64>| r.ok();
    for task in [Task::PredCls, Task::SgCls] {
        let mut cfg = SuiteConfig::new(task, KS.to_vec());
        cfg.constrained = vec![false, true];
        let report = metrics::recall_suite(&inst.preds, &inst.graphs, &inst.counts, &cfg).map_err(|e| e.to_string())?;
        let zs = metrics::n_shot_filter(&inst.graphs, &inst.counts, 0);
        for k in KS {
            for constrained in [false, true] {
                let v = metrics::variant_name(constrained);
                let rows = [
                    ("R", ok(metrics::recall_at_k(&inst.preds, &inst.graphs, k, constrained, task)), report.get(names::RECALL, k, v), recall(inst, k, constrained, task, None)),
                    ("R_ZS", ok(metrics::recall_at_k(&inst.preds, &zs, k, constrained, task)), report.get(names::RECALL_ZERO_SHOT, k, v), recall(inst, k, constrained, task, Some(0))),
                    ("mR", ok(metrics::mean_recall(&inst.preds, &inst.graphs, k, constrained, task)), report.get(names::MEAN_RECALL, k, v), mean_recall(inst, k, constrained, task)),
                ];
                for (name, direct, suite, oracle) in rows {
                    if direct != oracle || suite != oracle {
                        return Err(format!("{name}@{k} {v} {task:?}: direct {direct:?} suite {suite:?} oracle {oracle:?}"));
                    }
                }
            }
            let rows = [
                ("R_tr", ok(metrics::triplet_recall(&inst.preds, &inst.graphs, k, task)), report.get(names::TRIPLET_RECALL, k, names::PAIR), triplet_recall(inst, k, task)),
                (
                    "wR_tr",
                    ok(metrics::weighted_triplet_recall(&inst.preds, &inst.graphs, &inst.counts, k, task)),
                    report.get(names::WEIGHTED_TRIPLET_RECALL, k, names::PAIR),
                    weighted_triplet_recall(inst, k, task),
                ),
            ];
            for (name, direct, suite, oracle) in rows {
                if direct != oracle || suite != oracle {
                    return Err(format!("{name}@{k} {task:?}: direct {direct:?} suite {suite:?} oracle {oracle:?}"));
                }
            }
        }
    }
    Ok(())
}
