//! File formats, experiment pipelines and the `sgg` command line built on
//! [`sgg_core`].
//!
//! A dataset directory holds `train.jsonl` / `test.jsonl` scene graphs, the
//! parallel `*.features.jsonl` feature files and `manifest.json`. Training
//! writes `checkpoint.json` and `history.csv`; evaluation writes
//! `metrics.csv` and `metrics.json`.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;

pub use error::{LabError, Result};
