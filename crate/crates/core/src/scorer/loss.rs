//! Contrastive objective of the linear scorer and its analytic gradient.

use super::ScorerParams;
use crate::dataset::ContrastiveTuple;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, evaluated on the side that cannot overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(s_chosen - s_rejected)`.
pub fn loss_pair(s_chosen: f64, s_rejected: f64) -> f64 {
    softplus(-(s_chosen - s_rejected))
}

/// `-ln σ(s_chosen - s_reference)`.
pub fn loss_align(s_chosen: f64, s_reference: f64) -> f64 {
    softplus(-(s_chosen - s_reference))
}

pub fn total_loss(s_chosen: f64, s_rejected: f64, s_reference: f64, alpha: f64) -> f64 {
    loss_pair(s_chosen, s_rejected) + alpha * loss_align(s_chosen, s_reference)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub pair: f64,
    pub align: f64,
    pub total: f64,
}

pub fn tuple_loss(params: &ScorerParams, t: &ContrastiveTuple, alpha: f64) -> LossParts {
    let sc = params.score_values(t.chosen.features.values());
    let sr = params.score_values(t.rejected.features.values());
    let sref = params.score_values(t.reference.features.values());
    let pair = loss_pair(sc, sr);
    let align = loss_align(sc, sref);
    LossParts {
        pair,
        align,
        total: pair + alpha * align,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Gradient {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }
}

/// Gradient of the total loss with respect to weights and bias. Scores enter
/// only through differences, so the bias component is always zero.
pub fn grad_total_loss(params: &ScorerParams, t: &ContrastiveTuple, alpha: f64) -> Gradient {
    let (xc, xr, xref) = (
        t.chosen.features.values(),
        t.rejected.features.values(),
        t.reference.features.values(),
    );
    let delta = params.score_values(xc) - params.score_values(xr);
    let delta_a = params.score_values(xc) - params.score_values(xref);
    let g_pair = -sigmoid(-delta);
    let g_align = -alpha * sigmoid(-delta_a);
    let weights = (0..params.weights.len())
        .map(|i| {
            let at = |x: &[f64]| x.get(i).copied().unwrap_or(0.0);
            g_pair * (at(xc) - at(xr)) + g_align * (at(xc) - at(xref))
        })
        .collect();
    Gradient { weights, bias: 0.0 }
}
