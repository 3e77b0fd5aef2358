//! Scene graphs, FG/BG edge accounting and graph density.
//!
//! A scene graph stores only its annotated (foreground) edges. Every other
//! ordered node pair is background and is enumerated on demand, never stored.
//! Ordered pairs `(i, j)` with `i != j` are laid out in a canonical order,
//! row-major over `i` and skipping the diagonal, which is the order used by
//! feature bundles and predictions as well.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::freq::{Triplet, TripletCounts};
use crate::math;
use crate::{ClassId, Error, PredicateId, Result, BG};

/// Number of ordered pairs `(i, j)`, `i != j`, over `n` nodes.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1)
}

/// Canonical index of the ordered pair `(i, j)` among `n` nodes.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

/// Inverse of [`pair_index`].
pub fn pair_at(n: usize, index: usize) -> (usize, usize) {
    let i = index / (n - 1);
    let r = index % (n - 1);
    (i, if r < i { r } else { r + 1 })
}

/// A labeled edge `subject -> object`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub subject: usize,
    pub object: usize,
    pub predicate: PredicateId,
}

/// Unvalidated scene graph record, the shape of one line of a graph file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawGraph {
    pub graph_id: String,
    pub nodes: Vec<ClassId>,
    pub fg_edges: Vec<[u32; 3]>,
}

/// A validated scene graph.
///
/// Invariants: at least one node, no self-loops, node indices in range, at
/// most one FG edge per ordered pair and no FG edge labeled [`BG`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct SceneGraph {
    graph_id: String,
    nodes: Vec<ClassId>,
    fg_edges: Vec<Edge>,
    // predicate per canonical pair, BG for unannotated pairs
    pair_labels: Vec<PredicateId>,
}

impl SceneGraph {
    /// Validates a raw record. Repeated FG edges on the same ordered pair are
    /// collapsed, keeping the first occurrence.
    pub fn validate(raw: RawGraph) -> Result<Self> {
        let RawGraph {
            graph_id,
            nodes,
            fg_edges,
        } = raw;
        let n = nodes.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut pair_labels = alloc::vec![BG; pair_count(n)];
        let mut edges = Vec::with_capacity(fg_edges.len());
        for [s, o, p] in fg_edges {
            let (subject, object) = (s as usize, o as usize);
            if subject >= n || object >= n {
                return Err(Error::NodeOutOfRange {
                    subject,
                    object,
                    nodes: n,
                });
            }
            if subject == object {
                return Err(Error::SelfLoop { node: subject });
            }
            if p == BG {
                return Err(Error::BackgroundLabel { subject, object });
            }
            let slot = &mut pair_labels[pair_index(n, subject, object)];
            if *slot == BG {
                *slot = p;
                edges.push(Edge {
                    subject,
                    object,
                    predicate: p,
                });
            }
        }
        Ok(Self {
            graph_id,
            nodes,
            fg_edges: edges,
            pair_labels,
        })
    }

    pub fn new(
        graph_id: impl Into<String>,
        nodes: Vec<ClassId>,
        fg_edges: impl IntoIterator<Item = (usize, usize, PredicateId)>,
    ) -> Result<Self> {
        Self::validate(RawGraph {
            graph_id: graph_id.into(),
            nodes,
            fg_edges: fg_edges
                .into_iter()
                .map(|(s, o, p)| [s as u32, o as u32, p])
                .collect(),
        })
    }

    pub fn graph_id(&self) -> &str {
        &self.graph_id
    }

    pub fn nodes(&self) -> &[ClassId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn fg_edges(&self) -> &[Edge] {
        &self.fg_edges
    }

    pub fn fg_count(&self) -> usize {
        self.fg_edges.len()
    }

    pub fn bg_count(&self) -> usize {
        pair_count(self.nodes.len()) - self.fg_edges.len()
    }

    /// Label of the ordered pair `(i, j)`; [`BG`] when unannotated.
    pub fn label(&self, subject: usize, object: usize) -> PredicateId {
        self.pair_labels[pair_index(self.nodes.len(), subject, object)]
    }

    /// Labels of all ordered pairs in canonical order.
    pub fn pair_labels(&self) -> &[PredicateId] {
        &self.pair_labels
    }

    /// Class-level triplet of an FG edge.
    pub fn triplet(&self, edge: &Edge) -> Triplet {
        Triplet {
            subject: self.nodes[edge.subject],
            predicate: edge.predicate,
            object: self.nodes[edge.object],
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = Triplet> + '_ {
        self.fg_edges.iter().map(move |e| self.triplet(e))
    }

    /// Every ordered pair without an FG edge, in canonical order.
    pub fn bg_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.nodes.len();
        self.pair_labels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == BG)
            .map(|(k, _)| pair_at(n, k))
            .collect()
    }

    /// Same graph with FG edges restricted to those accepted by `keep`.
    pub fn retain_edges(&self, mut keep: impl FnMut(&Edge) -> bool) -> Self {
        let n = self.nodes.len();
        let mut out = self.clone();
        out.fg_edges.retain(|e| keep(e));
        out.pair_labels.iter_mut().for_each(|p| *p = BG);
        for e in &out.fg_edges {
            out.pair_labels[pair_index(n, e.subject, e.object)] = e.predicate;
        }
        out
    }
}

impl TryFrom<RawGraph> for SceneGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        Self::validate(raw)
    }
}

impl From<SceneGraph> for RawGraph {
    fn from(g: SceneGraph) -> Self {
        RawGraph {
            graph_id: g.graph_id,
            nodes: g.nodes,
            fg_edges: g
                .fg_edges
                .iter()
                .map(|e| [e.subject as u32, e.object as u32, e.predicate])
                .collect(),
        }
    }
}

/// Anything with FG and BG edge counts has a density `M_FG / (M_FG + M_BG)`.
pub trait Density {
    /// `(M_FG, M_BG)`.
    fn edge_counts(&self) -> (usize, usize);

    fn density(&self) -> Result<f64> {
        let (fg, bg) = self.edge_counts();
        if fg + bg == 0 {
            return Err(Error::UndefinedDensity);
        }
        Ok(fg as f64 / (fg + bg) as f64)
    }
}

impl Density for SceneGraph {
    fn edge_counts(&self) -> (usize, usize) {
        (self.fg_count(), self.bg_count())
    }
}

/// An ordered node pair inside a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairRef {
    pub graph: usize,
    pub subject: usize,
    pub object: usize,
}

/// The FG edges and BG pairs a loss is computed over: either every pair of a
/// batch or a subsample of them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeSet {
    pub fg: Vec<PairRef>,
    pub bg: Vec<PairRef>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.fg.len() + self.bg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &PairRef> {
        self.fg.iter().chain(self.bg.iter())
    }
}

impl Density for EdgeSet {
    fn edge_counts(&self) -> (usize, usize) {
        (self.fg.len(), self.bg.len())
    }
}

/// Graphs stacked into one loss unit. There are no pairs across graphs, so
/// `M_BG = Σ N_g (N_g - 1) - M_FG`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    graphs: Vec<SceneGraph>,
    n_total: usize,
    m_fg: usize,
    m_bg: usize,
}

impl Batch {
    pub fn new(graphs: Vec<SceneGraph>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let n_total = graphs.iter().map(SceneGraph::node_count).sum();
        let m_fg = graphs.iter().map(SceneGraph::fg_count).sum();
        let m_bg = graphs.iter().map(SceneGraph::bg_count).sum();
        Ok(Self {
            graphs,
            n_total,
            m_fg,
            m_bg,
        })
    }

    pub fn graphs(&self) -> &[SceneGraph] {
        &self.graphs
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn m_fg(&self) -> usize {
        self.m_fg
    }

    pub fn m_bg(&self) -> usize {
        self.m_bg
    }

    /// All FG edges and BG pairs of the batch.
    pub fn edges(&self) -> EdgeSet {
        let mut set = EdgeSet {
            fg: Vec::with_capacity(self.m_fg),
            bg: Vec::with_capacity(self.m_bg),
        };
        for (gi, g) in self.graphs.iter().enumerate() {
            let n = g.node_count();
            for (k, &p) in g.pair_labels.iter().enumerate() {
                let (subject, object) = pair_at(n, k);
                let pair = PairRef {
                    graph: gi,
                    subject,
                    object,
                };
                if p == BG {
                    set.bg.push(pair);
                } else {
                    set.fg.push(pair);
                }
            }
        }
        set
    }

    pub fn label(&self, pair: &PairRef) -> PredicateId {
        self.graphs[pair.graph].label(pair.subject, pair.object)
    }
}

impl Density for Batch {
    fn edge_counts(&self) -> (usize, usize) {
        (self.m_fg, self.m_bg)
    }
}

/// min / max / mean / population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: math::sqrt(var),
        })
    }
}

/// Zero-shot triplet counts of a dataset relative to a training table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroShotCounts {
    pub unique: usize,
    pub total: usize,
}

/// Dataset statistics in the layout of the usual dataset-variant tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub image_count: usize,
    pub unique_triplet_count: usize,
    pub total_triplet_count: usize,
    pub nodes: Summary,
    /// Per-graph density over graphs with at least two nodes.
    pub density: Option<Summary>,
    pub zero_shot: Option<ZeroShotCounts>,
}

pub fn dataset_stats(dataset: &[SceneGraph], train_counts: Option<&TripletCounts>) -> Result<StatsReport> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let sizes: Vec<f64> = dataset.iter().map(|g| g.node_count() as f64).collect();
    let densities: Vec<f64> = dataset.iter().filter_map(|g| g.density().ok()).collect();
    let unique: BTreeSet<Triplet> = dataset.iter().flat_map(SceneGraph::triplets).collect();
    let total = dataset.iter().map(SceneGraph::fg_count).sum();
    let zero_shot = train_counts.map(|counts| {
        let zs = crate::freq::zero_shot_set(counts, dataset, 0);
        ZeroShotCounts {
            unique: zs.len(),
            total: dataset
                .iter()
                .flat_map(SceneGraph::triplets)
                .filter(|t| zs.contains(t))
                .count(),
        }
    });
    Ok(StatsReport {
        image_count: dataset.len(),
        unique_triplet_count: unique.len(),
        total_triplet_count: total,
        // non-empty dataset
        nodes: Summary::of(&sizes).unwrap(),
        density: Summary::of(&densities),
        zero_shot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn g(nodes: Vec<u32>, edges: &[(usize, usize, u32)]) -> SceneGraph {
        SceneGraph::new("g", nodes, edges.iter().copied()).unwrap()
    }

    #[test]
    fn minimal_graph() {
        let graph = g(vec![3, 7], &[(0, 1, 2)]);
        assert_eq!(graph.node_count(), 2);
        assert_eq!(graph.fg_count(), 1);
        assert_eq!(graph.density().unwrap(), 0.5);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            SceneGraph::new("g", vec![3], [(0, 0, 2)]),
            Err(Error::SelfLoop { node: 0 })
        );
        assert_eq!(SceneGraph::new("g", vec![], []), Err(Error::EmptyGraph));
        assert!(matches!(
            SceneGraph::new("g", vec![1, 2], [(0, 2, 1)]),
            Err(Error::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            SceneGraph::new("g", vec![1, 2], [(0, 1, 0)]),
            Err(Error::BackgroundLabel { .. })
        ));
    }

    #[test]
    fn duplicate_pairs_keep_first_and_revalidation_is_idempotent() {
        let graph = g(vec![3, 7], &[(0, 1, 2), (0, 1, 5)]);
        assert_eq!(
            graph.fg_edges(),
            &[Edge {
                subject: 0,
                object: 1,
                predicate: 2
            }]
        );
        let again = SceneGraph::validate(RawGraph::from(graph.clone())).unwrap();
        assert_eq!(again, graph);
    }

    #[test]
    fn density_examples() {
        assert_eq!(g(vec![0; 5], &[]).density().unwrap(), 0.0);
        let eleven = g(vec![0; 11], &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (4, 5, 1)]);
        assert!((eleven.density().unwrap() - 5.0 / 110.0).abs() < 1e-15);
        assert_eq!(g(vec![4], &[]).density(), Err(Error::UndefinedDensity));
    }

    #[test]
    fn pair_index_roundtrip() {
        for n in 2..7 {
            let mut k = 0;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    assert_eq!(pair_index(n, i, j), k);
                    assert_eq!(pair_at(n, k), (i, j));
                    k += 1;
                }
            }
            assert_eq!(k, pair_count(n));
        }
    }

    #[test]
    fn bg_pairs_examples() {
        assert_eq!(g(vec![0, 1], &[(0, 1, 1)]).bg_pairs(), vec![(1, 0)]);
        assert_eq!(g(vec![0; 3], &[]).bg_pairs().len(), 6);
        let four = g(vec![0; 4], &[(0, 1, 1), (2, 3, 1), (3, 0, 2)]);
        let brute: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && ![(0, 1), (2, 3), (3, 0)].contains(&(i, j)))
            .collect();
        assert_eq!(four.bg_pairs(), brute);
        assert_eq!(brute.len(), 9);
    }

    #[test]
    fn batch_has_no_cross_graph_pairs() {
        let a = g(vec![0, 1], &[(0, 1, 1)]);
        let batch = Batch::new(vec![a.clone(), a]).unwrap();
        assert_eq!((batch.m_fg(), batch.m_bg()), (2, 2));
        assert_eq!(batch.density().unwrap(), 0.5);
        assert_eq!(Batch::new(vec![]), Err(Error::Empty("batch")));
    }

    #[test]
    fn batch_of_mixed_densities() {
        let a = g(vec![0, 1], &[(0, 1, 1)]);
        let b = g(vec![0; 11], &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (4, 5, 1)]);
        // enumerate within-graph ordered pairs directly
        let mut fg = 0;
        let mut all = 0;
        for graph in [&a, &b] {
            for i in 0..graph.node_count() {
                for j in 0..graph.node_count() {
                    if i != j {
                        all += 1;
                        fg += (graph.label(i, j) != BG) as usize;
                    }
                }
            }
        }
        let batch = Batch::new(vec![a, b]).unwrap();
        assert_eq!((fg, all), (6, 112));
        assert!((batch.density().unwrap() - 6.0 / 112.0).abs() < 1e-15);
        let edges = batch.edges();
        assert_eq!((edges.fg.len(), edges.bg.len()), (6, 106));
    }

    #[test]
    fn stats_examples() {
        let a = g(vec![0, 1], &[(0, 1, 1)]);
        let s = dataset_stats(core::slice::from_ref(&a), None).unwrap();
        assert_eq!((s.image_count, s.nodes.mean), (1, 2.0));
        assert_eq!(s.density.unwrap().mean, 0.5);

        let b = g(vec![0; 11], &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (4, 5, 1)]);
        let s = dataset_stats(&[a.clone(), b], None).unwrap();
        assert_eq!(s.nodes.mean, 6.5);
        let expect = (0.5 + 5.0 / 110.0) / 2.0;
        assert!((s.density.unwrap().mean - expect).abs() < 1e-15);
        assert!((expect - 0.2727).abs() < 1e-3);

        let counts = TripletCounts::from_graphs(core::slice::from_ref(&a));
        let s = dataset_stats(core::slice::from_ref(&a), Some(&counts)).unwrap();
        assert_eq!(s.zero_shot, Some(ZeroShotCounts { unique: 0, total: 0 }));
        assert_eq!(dataset_stats(&[], None), Err(Error::Empty("dataset")));
    }
}
