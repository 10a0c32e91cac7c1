//! Response quality scorers used by sentinels.

pub mod loss;
pub mod remote;
mod train;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{answers_match, Context, ResponseRecord};
use crate::debate::{AgentId, Message, Task};
use crate::features::{featurize, FeatureVector, DEFAULT_DIM, FEATURE_NAMES};

pub use loss::{grad_total_loss, loss_align, loss_pair, total_loss, Gradient};
pub use remote::{Fallback, RemoteScoreError, RemoteScorer};
pub use train::{calibrate_bias, ranking_accuracy, train, TrainError, TrainingConfig, TrainingHistory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("feature vector has dimension {got}, scorer expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Remote(#[from] RemoteScoreError),
}

/// Weights and bias of the linear scorer, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_names: Vec<String>,
    /// Manifest hash of the training set, empty if untrained.
    #[serde(default)]
    pub trained_on: String,
}

impl ScorerParams {
    pub fn zeros(dim: usize) -> Self {
        let feature_names = if dim == DEFAULT_DIM {
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..dim).map(|i| format!("f{i}")).collect()
        };
        Self {
            dim,
            weights: vec![0.0; dim],
            bias: 0.0,
            feature_names,
            trained_on: String::new(),
        }
    }

    pub fn with_weights(weights: Vec<f64>, bias: f64) -> Self {
        let mut p = Self::zeros(weights.len());
        p.weights = weights;
        p.bias = bias;
        p
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.weights.len() != self.dim {
            return Err(format!("{} weights for dimension {}", self.weights.len(), self.dim));
        }
        if !self.weights.iter().all(|w| w.is_finite()) || !self.bias.is_finite() {
            return Err("scorer parameters must be finite".into());
        }
        Ok(())
    }

    pub fn score(&self, features: &FeatureVector) -> Result<f64, ScoreError> {
        if features.dim() != self.dim {
            return Err(ScoreError::DimensionMismatch {
                expected: self.dim,
                got: features.dim(),
            });
        }
        Ok(self.score_values(features.values()))
    }

    pub(crate) fn score_values(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// Everything a scorer may look at for one sentinel round.
#[derive(Debug, Clone, Copy)]
pub struct RoundInput<'a> {
    pub task: &'a Task,
    /// The sentinel's context before this round.
    pub context: &'a Context,
    pub candidates: &'a [&'a Message],
    /// Ground-truth adversary set; only the oracle reads it.
    pub adversaries: &'a BTreeSet<AgentId>,
}

pub trait CreditScorer: Send + Sync {
    /// One score per candidate, in candidate order.
    fn score_round(&self, input: &RoundInput<'_>) -> Result<Vec<f64>, ScoreError>;

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearScorer {
    pub params: ScorerParams,
}

impl CreditScorer for LinearScorer {
    fn score_round(&self, input: &RoundInput<'_>) -> Result<Vec<f64>, ScoreError> {
        input
            .candidates
            .iter()
            .map(|m| {
                self.params
                    .score(&featurize(&ResponseRecord::from_message(m), input.context))
            })
            .collect()
    }

    fn name(&self) -> &'static str {
        "trained"
    }
}

/// The ideal detector: 1 for a correct benign answer, 0.5 for a correct
/// answer from an adversary, 0 otherwise.
pub fn oracle_score(response: &ResponseRecord, task: &Task, adversaries: &BTreeSet<AgentId>) -> f64 {
    let correct = answers_match(&response.answer, &task.ground_truth);
    let adversarial = response.sender.is_some_and(|s| adversaries.contains(&s));
    match (correct, adversarial) {
        (true, false) => 1.0,
        (true, true) => 0.5,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleScorer;

impl CreditScorer for OracleScorer {
    fn score_round(&self, input: &RoundInput<'_>) -> Result<Vec<f64>, ScoreError> {
        Ok(input
            .candidates
            .iter()
            .map(|m| oracle_score(&ResponseRecord::from_message(m), input.task, input.adversaries))
            .collect())
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}

/// Scorer choice as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerSpec {
    Trained {
        params: ScorerParams,
    },
    Oracle,
    Remote {
        endpoint: String,
        #[serde(default = "remote::default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        fallback: Fallback,
    },
}

impl ScorerSpec {
    pub fn build(&self) -> Result<Arc<dyn CreditScorer>, String> {
        Ok(match self {
            ScorerSpec::Trained { params } => {
                params.validate()?;
                Arc::new(LinearScorer { params: params.clone() })
            }
            ScorerSpec::Oracle => Arc::new(OracleScorer),
            ScorerSpec::Remote {
                endpoint,
                timeout_ms,
                fallback,
            } => Arc::new(RemoteScorer::new(endpoint.clone(), *timeout_ms, *fallback)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::idx;

    #[test]
    fn linear_score_examples() {
        let x = FeatureVector(vec![2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ScorerParams::zeros(8).score(&x).unwrap(), 0.0);
        let mut onehot = ScorerParams::zeros(8);
        onehot.weights[1] = 1.0;
        onehot.bias = 0.25;
        assert_eq!(onehot.score(&x).unwrap(), 1.25);
        let mut w = vec![0.0; 8];
        w[0] = 1.0;
        w[1] = -1.0;
        assert_eq!(ScorerParams::with_weights(w, 0.5).score(&x).unwrap(), 1.5);
        assert!(matches!(
            onehot.score(&FeatureVector::zeros(3)),
            Err(ScoreError::DimensionMismatch { expected: 8, got: 3 })
        ));
    }

    fn msg(sender: usize, claim: &str, fc: f64) -> Message {
        let mut features = FeatureVector::zeros(8);
        features.set(idx::FACTUAL_CONSISTENCY, fc);
        Message {
            sender: AgentId(sender),
            round: 1,
            answer_claim: claim.into(),
            features,
            rationale_digest: String::new(),
        }
    }

    #[test]
    fn oracle_round() {
        let task = Task::new("q", vec!["A".into(), "B".into()], "A", "mcq").unwrap();
        let ctx = Context::new(task.describe(), "", 4000);
        let ms = [msg(1, "A", 1.0), msg(2, "A", 1.0), msg(3, "B", 0.0), msg(4, "A", 0.0)];
        let refs: Vec<&Message> = ms.iter().collect();
        let adv = BTreeSet::from([AgentId(3), AgentId(4)]);
        let input = RoundInput {
            task: &task,
            context: &ctx,
            candidates: &refs,
            adversaries: &adv,
        };
        assert_eq!(OracleScorer.score_round(&input).unwrap(), vec![1.0, 1.0, 0.0, 0.5]);
    }

    #[test]
    fn one_hot_scorer_orders_by_feature() {
        let task = Task::new("q", vec!["A".into(), "B".into()], "A", "mcq").unwrap();
        let ctx = Context::new(task.describe(), "", 4000);
        let ms = [msg(1, "A", 0.7), msg(2, "B", 0.2), msg(3, "A", 0.9)];
        let refs: Vec<&Message> = ms.iter().collect();
        let mut p = ScorerParams::zeros(8);
        p.weights[idx::FACTUAL_CONSISTENCY] = 1.0;
        let s = LinearScorer { params: p }
            .score_round(&RoundInput {
                task: &task,
                context: &ctx,
                candidates: &refs,
                adversaries: &BTreeSet::new(),
            })
            .unwrap();
        assert_eq!(s, vec![0.7, 0.2, 0.9]);
    }

    #[test]
    fn params_json_shape() {
        let json = serde_json::to_value(ScorerParams::zeros(8)).unwrap();
        for k in ["dim", "weights", "bias", "feature_names", "trained_on"] {
            assert!(json.get(k).is_some(), "{k}");
        }
        let spec: ScorerSpec = serde_json::from_str(r#"{"kind":"remote","endpoint":"http://x"}"#).unwrap();
        assert!(matches!(
            spec,
            ScorerSpec::Remote {
                fallback: Fallback::Fail,
                ..
            }
        ));
    }
}
