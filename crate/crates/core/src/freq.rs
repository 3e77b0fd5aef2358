//! Frequency baseline `P(predicate | subject class, object class)`, triplet
//! occurrence counts and zero/n-shot triplet sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{pair_at, pair_count, SceneGraph};
use crate::metrics::Prediction;
use crate::{ClassId, Error, PredicateId, Result};

/// A class-level `<subject, predicate, object>` composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: ClassId,
    pub predicate: PredicateId,
    pub object: ClassId,
}

impl Triplet {
    pub const fn new(subject: ClassId, predicate: PredicateId, object: ClassId) -> Self {
        Self {
            subject,
            predicate,
            object,
        }
    }
}

type Nested = BTreeMap<u32, BTreeMap<u32, BTreeMap<u32, u64>>>;

/// Training-set occurrence count `n_t` of every triplet. Absent keys count 0.
///
/// Serializes as nested maps `subject -> predicate -> object -> count`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "Nested", into = "Nested")]
pub struct TripletCounts {
    counts: BTreeMap<Triplet, u64>,
}

impl TripletCounts {
    pub fn from_graphs(graphs: &[SceneGraph]) -> Self {
        let mut counts = BTreeMap::new();
        for t in graphs.iter().flat_map(SceneGraph::triplets) {
            *counts.entry(t).or_insert(0) += 1;
        }
        Self { counts }
    }

    pub fn get(&self, t: &Triplet) -> u64 {
        self.counts.get(t).copied().unwrap_or(0)
    }

    /// Number of distinct triplets.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Σ n_t.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Triplet, &u64)> {
        self.counts.iter()
    }
}

impl From<Nested> for TripletCounts {
    fn from(nested: Nested) -> Self {
        let mut counts = BTreeMap::new();
        for (s, by_pred) in nested {
            for (p, by_obj) in by_pred {
                for (o, n) in by_obj {
                    if n > 0 {
                        counts.insert(Triplet::new(s, p, o), n);
                    }
                }
            }
        }
        Self { counts }
    }
}

impl From<TripletCounts> for Nested {
    fn from(tc: TripletCounts) -> Self {
        let mut nested = Nested::new();
        for (t, n) in tc.counts {
            nested
                .entry(t.subject)
                .or_default()
                .entry(t.predicate)
                .or_default()
                .insert(t.object, n);
        }
        nested
    }
}

/// Distinct test triplets seen at most `n` times in training. `n = 0` gives
/// the zero-shot set.
pub fn zero_shot_set(counts: &TripletCounts, test: &[SceneGraph], n: u64) -> BTreeSet<Triplet> {
    test.iter()
        .flat_map(SceneGraph::triplets)
        .filter(|t| counts.get(t) <= n)
        .collect()
}

/// Predicate co-occurrence counts per (subject class, object class) pair.
///
/// Serializes as `{num_predicates, smoothing, counts}` where `counts` is the
/// nested map `subject -> object -> predicate -> count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqModel {
    num_predicates: u32,
    smoothing: f64,
    counts: Nested,
}

impl FreqModel {
    /// Tallies FG edges of `train`. Predicates must lie in `1..=num_predicates`.
    pub fn fit(train: &[SceneGraph], num_predicates: u32, smoothing: f64) -> Result<Self> {
        if num_predicates == 0 {
            return Err(Error::InvalidConfig("num_predicates must be >= 1".into()));
        }
        check_smoothing(smoothing)?;
        let mut counts = Nested::new();
        for t in train.iter().flat_map(SceneGraph::triplets) {
            if t.predicate > num_predicates {
                return Err(Error::PredicateOutOfRange {
                    predicate: t.predicate,
                    max: num_predicates,
                });
            }
            *counts
                .entry(t.subject)
                .or_default()
                .entry(t.object)
                .or_default()
                .entry(t.predicate)
                .or_insert(0) += 1;
        }
        Ok(Self {
            num_predicates,
            smoothing,
            counts,
        })
    }

    pub fn num_predicates(&self) -> u32 {
        self.num_predicates
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn with_smoothing(mut self, smoothing: f64) -> Result<Self> {
        check_smoothing(smoothing)?;
        self.smoothing = smoothing;
        Ok(self)
    }

    pub fn count(&self, subject: ClassId, object: ClassId, predicate: PredicateId) -> u64 {
        self.row(subject, object)
            .and_then(|r| r.get(&predicate))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_seen(&self, subject: ClassId, object: ClassId) -> bool {
        self.row(subject, object).is_some()
    }

    fn row(&self, subject: ClassId, object: ClassId) -> Option<&BTreeMap<u32, u64>> {
        self.counts.get(&subject).and_then(|m| m.get(&object))
    }

    /// Smoothed conditional distribution over predicate ids, indexed by id:
    /// slot 0 (background) is always 0 and slots `1..=P` sum to 1.
    pub fn predict(&self, subject: ClassId, object: ClassId) -> Result<Vec<f64>> {
        let p = self.num_predicates as usize;
        let mut dist = alloc::vec![0.0; p + 1];
        let row = self.row(subject, object);
        if row.is_none() && self.smoothing == 0.0 {
            return Err(Error::UnseenPair { subject, object });
        }
        for (id, slot) in dist.iter_mut().enumerate().skip(1) {
            let c = row.and_then(|r| r.get(&(id as u32))).copied().unwrap_or(0);
            *slot = c as f64 + self.smoothing;
        }
        let total: f64 = dist.iter().sum();
        dist.iter_mut().for_each(|v| *v /= total);
        Ok(dist)
    }

    /// Most frequent predicate of a seen pair, ties toward the lower id.
    pub fn argmax(&self, subject: ClassId, object: ClassId) -> Option<PredicateId> {
        let row = self.row(subject, object)?;
        let mut best: Option<(u32, u64)> = None;
        for (&p, &c) in row {
            // ascending ids, so strict comparison keeps the lowest on ties
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((p, c));
            }
        }
        best.map(|(p, _)| p)
    }
}

impl FreqModel {
    /// The blind PredCls predictor: nodes one-hot on their ground-truth class
    /// out of `num_obj`, every pair scored by `P(R | s, o)`. A pair never
    /// seen in training under zero smoothing has no predicate distribution
    /// and puts all of its mass on BG.
    pub fn predictions(&self, graphs: &[SceneGraph], num_obj: u32) -> Result<Vec<Prediction>> {
        graphs
            .iter()
            .map(|g| {
                let n = g.node_count();
                let mut nodes = Vec::with_capacity(n);
                for &c in g.nodes() {
                    if c >= num_obj {
                        return Err(Error::ClassOutOfRange { class: c, count: num_obj });
                    }
                    let mut d = alloc::vec![0.0; num_obj as usize];
                    d[c as usize] = 1.0;
                    nodes.push(d);
                }
                let pairs = (0..pair_count(n))
                    .map(|k| {
                        let (s, o) = pair_at(n, k);
                        match self.predict(g.nodes()[s], g.nodes()[o]) {
                            Err(Error::UnseenPair { .. }) => {
                                let mut d = alloc::vec![0.0; self.num_predicates as usize + 1];
                                d[0] = 1.0;
                                Ok(d)
                            }
                            other => other,
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Prediction::new(g.graph_id(), nodes, pairs)
            })
            .collect()
    }
}

fn check_smoothing(smoothing: f64) -> Result<()> {
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!(
            "smoothing must be finite and >= 0, got {smoothing}"
        )));
    }
    Ok(())
}
