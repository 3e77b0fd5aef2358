//! Scene-graph generation laboratory core.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std`: the graph data model and density accounting, the
//! frequency baseline, the family of FG/BG edge losses, a linear
//! node/edge classifier with hand-written gradients, the recall metric suite
//! and a seeded synthetic world generator. File formats, the command line and
//! anything touching the filesystem live in the `sgg-lab` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod freq;
pub mod graph;
pub mod loss;
mod math;
pub mod metrics;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
pub use freq::{FreqModel, Triplet, TripletCounts};
pub use graph::{Batch, EdgeSet, PairRef, RawGraph, SceneGraph, StatsReport};
pub use loss::{EdgeLossTerms, EdgeWeights, LossConfig, LossValue};
pub use metrics::{MetricReport, Prediction, RankedTriplet};
pub use model::{ClassifierModel, FeatureBundle, Gradients, Task, TrainConfig};
pub use synth::{World, WorldConfig};

/// Object class identifier.
pub type ClassId = u32;

/// Predicate class identifier. `0` is the background ("no relation") class.
pub type PredicateId = u32;

/// The background predicate label.
pub const BG: PredicateId = 0;
