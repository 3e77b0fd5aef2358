//! Versioned JSON model checkpoints.

use serde::{Deserialize, Serialize};
use sgg_core::model::ModelDims;
use sgg_core::{ClassifierModel, FreqModel, Gradients, TrainConfig};

use crate::error::{LabError, Result};

pub const FORMAT: &str = "sgg-checkpoint";
pub const VERSION: u32 = 1;

/// Weight matrices are nested arrays with one row per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub dims: ModelDims,
    pub train_config: Option<TrainConfig>,
    pub node_weights: Vec<Vec<f64>>,
    pub node_bias: Vec<f64>,
    pub edge_weights: Vec<Vec<f64>>,
    pub edge_bias: Vec<f64>,
    pub freq_bias: Option<FreqModel>,
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    if width == 0 {
        return Vec::new();
    }
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

impl Checkpoint {
    pub fn new(model: &ClassifierModel, train_config: Option<TrainConfig>) -> Self {
        let dims = *model.dims();
        let p = model.params();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            seed: model.seed(),
            dims,
            train_config,
            node_weights: rows(&p.node_weights, dims.num_obj),
            node_bias: p.node_bias,
            edge_weights: rows(&p.edge_weights, dims.num_pred + 1),
            edge_bias: p.edge_bias,
            freq_bias: model.freq_bias().cloned(),
        }
    }

    pub fn model(&self) -> Result<ClassifierModel> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(LabError::Schema(format!(
                "unsupported checkpoint {} v{} (expected {FORMAT} v{VERSION})",
                self.format, self.version
            )));
        }
        let d = &self.dims;
        let flat = |m: &[Vec<f64>], height: usize, width: usize, what: &str| -> Result<Vec<f64>> {
            if m.len() != height || m.iter().any(|r| r.len() != width) {
                return Err(LabError::Schema(format!("checkpoint {what} is not {height}x{width}")));
            }
            Ok(m.concat())
        };
        let params = Gradients {
            node_weights: flat(&self.node_weights, d.node_dim, d.num_obj, "node_weights")?,
            node_bias: self.node_bias.clone(),
            edge_weights: flat(&self.edge_weights, d.edge_dim, d.num_pred + 1, "edge_weights")?,
            edge_bias: self.edge_bias.clone(),
        };
        Ok(ClassifierModel::from_parts(*d, self.seed, params, self.freq_bias.clone())?)
    }
}
