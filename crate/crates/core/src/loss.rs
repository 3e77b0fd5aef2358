//! Edge loss formulations.
//!
//! All variants split the edge cross-entropies of a batch into a foreground
//! mean `l_fg` over annotated edges and a background mean `l_bg` over the
//! remaining ordered pairs, with batch density `d = m_fg / (m_fg + m_bg)`:
//!
//! | variant        | total                                        |
//! |----------------|----------------------------------------------|
//! | `Baseline`     | `l_node + d·l_fg + (1 − d)·l_bg`             |
//! | `Normalized`   | `l_node + γ·(l_fg + (m_bg / m_fg)·l_bg)`     |
//! | `TunedAb`      | `l_node + α·l_fg + β·l_bg`                   |
//! | `TunedLambda`  | `l_node + λ·(d·l_fg + (1 − d)·l_bg)`         |
//!
//! The baseline row is exactly the flat mean over all `m_fg + m_bg` pairs.
//! Every variant is also a weighted sum of per-edge cross-entropies, see
//! [`per_edge_weights`], which is what training backpropagates through.

use alloc::collections::BTreeMap;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::graph::{Density, EdgeSet, PairRef};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum LossConfig {
    #[default]
    Baseline,
    Normalized { gamma: f64 },
    TunedAb { alpha: f64, beta: f64 },
    TunedLambda { lambda: f64 },
}

impl LossConfig {
    /// The hyperparameter-free density-normalized loss (γ = 1).
    pub const NORMALIZED: LossConfig = LossConfig::Normalized { gamma: 1.0 };

    pub fn name(&self) -> &'static str {
        match self {
            LossConfig::Baseline => "baseline",
            LossConfig::Normalized { .. } => "normalized",
            LossConfig::TunedAb { .. } => "tuned-ab",
            LossConfig::TunedLambda { .. } => "tuned-lambda",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match *self {
            LossConfig::Baseline => Ok(()),
            LossConfig::Normalized { gamma } => check("gamma", gamma),
            LossConfig::TunedAb { alpha, beta } => check("alpha", alpha).and(check("beta", beta)),
            LossConfig::TunedLambda { lambda } => check("lambda", lambda),
        }
    }

    /// Combines node loss and edge terms according to this variant.
    pub fn evaluate(&self, l_node: f64, terms: &EdgeLossTerms) -> Result<LossValue> {
        self.validate()?;
        match *self {
            LossConfig::Baseline => Ok(baseline_loss(l_node, terms)),
            LossConfig::Normalized { gamma } => normalized_loss(l_node, terms, gamma),
            LossConfig::TunedAb { .. } | LossConfig::TunedLambda { .. } => tuned_loss(l_node, terms, self),
        }
    }
}

/// Foreground and background mean edge losses of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeLossTerms {
    pub l_fg: f64,
    pub l_bg: f64,
    pub m_fg: usize,
    pub m_bg: usize,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub l_node: f64,
    pub edge_terms: EdgeLossTerms,
}

/// Splits per-pair losses into FG and BG means.
///
/// `losses` must hold exactly one finite non-negative value for every pair of
/// `edges`. A group with no members has mean 0. An edge set with no pairs at
/// all has no density and is rejected.
pub fn edge_terms(edges: &EdgeSet, losses: &BTreeMap<PairRef, f64>) -> Result<EdgeLossTerms> {
    let d = edges.density()?;
    let mut seen = 0;
    let mut sum = |pairs: &[PairRef]| -> Result<f64> {
        let mut total = 0.0;
        for pair in pairs {
            let value = *losses.get(pair).ok_or(Error::MissingLoss(*pair))?;
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidLoss { pair: *pair, value });
            }
            total += value;
            seen += 1;
        }
        Ok(total)
    };
    let fg_sum = sum(&edges.fg)?;
    let bg_sum = sum(&edges.bg)?;
    if seen != losses.len() {
        let extra = losses
            .keys()
            .find(|k| !edges.fg.contains(k) && !edges.bg.contains(k))
            .copied();
        // duplicates in `edges` are the only other way to get here
        return Err(extra.map_or(Error::InvalidConfig("edge set contains duplicate pairs".into()), Error::ExtraLoss));
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(EdgeLossTerms {
        l_fg: mean(fg_sum, edges.fg.len()),
        l_bg: mean(bg_sum, edges.bg.len()),
        m_fg: edges.fg.len(),
        m_bg: edges.bg.len(),
        d,
    })
}

/// Density-weighted form of the flat-mean loss.
pub fn baseline_loss(l_node: f64, terms: &EdgeLossTerms) -> LossValue {
    LossValue {
        total: l_node + terms.d * terms.l_fg + (1.0 - terms.d) * terms.l_bg,
        l_node,
        edge_terms: *terms,
    }
}

pub fn normalized_loss(l_node: f64, terms: &EdgeLossTerms, gamma: f64) -> Result<LossValue> {
    if terms.m_fg == 0 {
        return Err(Error::DegenerateBatch);
    }
    let ratio = terms.m_bg as f64 / terms.m_fg as f64;
    Ok(LossValue {
        total: l_node + gamma * (terms.l_fg + ratio * terms.l_bg),
        l_node,
        edge_terms: *terms,
    })
}

pub fn tuned_loss(l_node: f64, terms: &EdgeLossTerms, cfg: &LossConfig) -> Result<LossValue> {
    let edge = match *cfg {
        LossConfig::TunedAb { alpha, beta } => alpha * terms.l_fg + beta * terms.l_bg,
        LossConfig::TunedLambda { lambda } => lambda * (terms.d * terms.l_fg + (1.0 - terms.d) * terms.l_bg),
        other => {
            return Err(Error::InvalidConfig(format!(
                "tuned loss needs tuned-ab or tuned-lambda, got {}",
                other.name()
            )))
        }
    };
    Ok(LossValue {
        total: l_node + edge,
        l_node,
        edge_terms: *terms,
    })
}

/// Weight applied to every FG edge and to every BG pair respectively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeights {
    pub fg: f64,
    pub bg: f64,
}

impl EdgeWeights {
    /// Per-pair weights for the pairs of `edges`, FG first.
    pub fn for_pairs<'a>(&'a self, edges: &'a EdgeSet) -> impl Iterator<Item = (PairRef, f64)> + 'a {
        let fg = edges.fg.iter().map(move |p| (*p, self.fg));
        fg.chain(edges.bg.iter().map(move |p| (*p, self.bg)))
    }
}

/// Weights `w` such that `l_node + Σ w_e · ce_e` equals the configured loss for
/// any per-edge cross-entropies `ce_e`.
pub fn per_edge_weights(edges: &impl Density, cfg: &LossConfig) -> Result<EdgeWeights> {
    cfg.validate()?;
    let (m_fg, m_bg) = edges.edge_counts();
    if m_fg + m_bg == 0 {
        return Err(Error::UndefinedDensity);
    }
    let per = |scale: f64, n: usize| if n == 0 { 0.0 } else { scale / n as f64 };
    let all = (m_fg + m_bg) as f64;
    Ok(match *cfg {
        LossConfig::Baseline => EdgeWeights {
            fg: 1.0 / all,
            bg: 1.0 / all,
        },
        LossConfig::Normalized { gamma } => {
            if m_fg == 0 {
                return Err(Error::DegenerateBatch);
            }
            // γ (m_bg / m_fg) (1 / m_bg) = γ / m_fg
            let w = gamma / m_fg as f64;
            EdgeWeights { fg: w, bg: w }
        }
        LossConfig::TunedAb { alpha, beta } => EdgeWeights {
            fg: per(alpha, m_fg),
            bg: per(beta, m_bg),
        },
        LossConfig::TunedLambda { lambda } => EdgeWeights {
            fg: lambda / all,
            bg: lambda / all,
        },
    })
}
