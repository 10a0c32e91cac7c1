//! Mini-batch gradient descent on the contrastive objective.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loss::{grad_total_loss, tuple_loss, Gradient};
use super::ScorerParams;
use crate::dataset::ContrastiveTuple;
use crate::features::DEFAULT_DIM;
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Weight of the alignment term.
    pub align_weight: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub l2_penalty: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            align_weight: 1.0,
            learning_rate: 0.5,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            l2_penalty: 0.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    Empty,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("tuple {id} has feature dimension {got}, expected {expected}")]
    Dimension { id: String, expected: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

/// Per-epoch means over the training set and held-out ranking accuracy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub total_loss: Vec<f64>,
    pub pair_loss: Vec<f64>,
    pub align_loss: Vec<f64>,
    pub heldout_accuracy: Vec<f64>,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.align_weight.is_finite() && self.align_weight >= 0.0) {
            return bad("align_weight must be finite and >= 0");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and >= 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return bad("l2_penalty must be finite and >= 0");
        }
        Ok(())
    }
}

/// Fraction of tuples whose chosen response outscores the rejected one; ties
/// count one half.
pub fn ranking_accuracy(params: &ScorerParams, tuples: &[ContrastiveTuple]) -> f64 {
    if tuples.is_empty() {
        return 0.0;
    }
    let wins: f64 = tuples
        .iter()
        .map(|t| {
            let c = params.score_values(t.chosen.features.values());
            let r = params.score_values(t.rejected.features.values());
            if c > r {
                1.0
            } else if c == r {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    wins / tuples.len() as f64
}

fn mean_losses(params: &ScorerParams, tuples: &[ContrastiveTuple], alpha: f64) -> (f64, f64, f64) {
    let n = tuples.len() as f64;
    let (mut t, mut p, mut a) = (0.0, 0.0, 0.0);
    for x in tuples {
        let l = tuple_loss(params, x, alpha);
        t += l.total;
        p += l.pair;
        a += l.align;
    }
    (t / n, p / n, a / n)
}

/// Trains from zero weights. Tuples are first ordered by id so the result
/// does not depend on input order. Held-out accuracy falls back to the
/// training set when `heldout` is empty.
pub fn train(
    tuples: &[ContrastiveTuple],
    heldout: &[ContrastiveTuple],
    cfg: &TrainingConfig,
) -> Result<(ScorerParams, TrainingHistory), TrainError> {
    cfg.validate()?;
    if tuples.is_empty() {
        return Err(TrainError::Empty);
    }
    let dim = tuples[0].chosen.features.dim();
    let dim = if dim == 0 { DEFAULT_DIM } else { dim };
    for t in tuples.iter().chain(heldout) {
        for r in [&t.chosen, &t.rejected, &t.reference] {
            if r.features.dim() != dim {
                return Err(TrainError::Dimension {
                    id: t.id.clone(),
                    expected: dim,
                    got: r.features.dim(),
                });
            }
        }
    }
    let mut data: Vec<&ContrastiveTuple> = tuples.iter().collect();
    data.sort_by(|a, b| a.id.cmp(&b.id));
    let sorted: Vec<ContrastiveTuple> = data.iter().map(|t| (*t).clone()).collect();
    let eval_set = if heldout.is_empty() { &sorted[..] } else { heldout };

    let alpha = cfg.align_weight;
    let mut params = ScorerParams::zeros(dim);
    let mut history = TrainingHistory::default();
    let mut rng = stream_rng(cfg.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..sorted.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut g = Gradient::zeros(dim);
            let mut loss = 0.0;
            for &i in chunk {
                let t = &sorted[i];
                loss += tuple_loss(&params, t, alpha).total;
                let gi = grad_total_loss(&params, t, alpha);
                for (acc, v) in g.weights.iter_mut().zip(&gi.weights) {
                    *acc += v;
                }
                g.bias += gi.bias;
            }
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch });
            }
            let n = chunk.len() as f64;
            for (w, gw) in params.weights.iter_mut().zip(&g.weights) {
                let step = gw / n + cfg.l2_penalty * *w;
                *w -= cfg.learning_rate * step;
            }
            params.bias -= cfg.learning_rate * g.bias / n;
        }
        let (t, p, a) = mean_losses(&params, &sorted, alpha);
        if !t.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
            });
        }
        history.total_loss.push(t);
        history.pair_loss.push(p);
        history.align_loss.push(a);
        history.heldout_accuracy.push(ranking_accuracy(&params, eval_set));
    }
    Ok((params, history))
}

/// Sets the bias so the midpoint between mean chosen and mean rejected scores
/// maps to 0. The objective is bias-free, so this is the only step that moves
/// the bias.
pub fn calibrate_bias(params: &mut ScorerParams, tuples: &[ContrastiveTuple]) {
    if tuples.is_empty() {
        return;
    }
    let n = tuples.len() as f64;
    let mut unbiased = params.clone();
    unbiased.bias = 0.0;
    let mc: f64 = tuples
        .iter()
        .map(|t| unbiased.score_values(t.chosen.features.values()))
        .sum::<f64>()
        / n;
    let mr: f64 = tuples
        .iter()
        .map(|t| unbiased.score_values(t.rejected.features.values()))
        .sum::<f64>()
        / n;
    params.bias = -(mc + mr) / 2.0;
}
