//! Response feature vectors and the generative feature model used by the
//! simulated agents.
//!
//! Each message carries a fixed-length feature vector. Two components
//! (`claim_agreement` and `context_match`) depend on the dialogue context a
//! scorer sees, so agents leave them at zero and [`featurize`] fills them in.
//! The remaining components come from the emitting policy.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::summarize::parse_summary;
use crate::dataset::{Context, ResponseRecord};
use crate::debate::majority_label;

pub const DEFAULT_DIM: usize = 8;

pub const FEATURE_NAMES: [&str; DEFAULT_DIM] = [
    "claim_agreement_with_context_majority",
    "factual_consistency",
    "persuasiveness",
    "authority",
    "novelty",
    "verbosity",
    "flip_tendency",
    "context_match",
];

/// Component indices into a [`FeatureVector`].
pub mod idx {
    pub const CLAIM_AGREEMENT: usize = 0;
    pub const FACTUAL_CONSISTENCY: usize = 1;
    pub const PERSUASIVENESS: usize = 2;
    pub const AUTHORITY: usize = 3;
    pub const NOVELTY: usize = 4;
    pub const VERBOSITY: usize = 5;
    pub const FLIP_TENDENCY: usize = 6;
    pub const CONTEXT_MATCH: usize = 7;
}

/// Components drawn with Gaussian noise by the feature model.
pub const NOISY_COMPONENTS: [usize; 5] = [
    idx::FACTUAL_CONSISTENCY,
    idx::PERSUASIVENESS,
    idx::AUTHORITY,
    idx::NOVELTY,
    idx::VERBOSITY,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, i: usize, v: f64) {
        if let Some(slot) = self.0.get_mut(i) {
            *slot = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn distance(&self, other: &FeatureVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Means and noise of the benign and adversarial feature distributions.
///
/// The adversarial mean differs from the benign mean only in
/// `factual_consistency`, one unit lower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub benign_mean: Vec<f64>,
    pub adversarial_mean: Vec<f64>,
    pub sigma: f64,
}

impl Default for FeatureModel {
    fn default() -> Self {
        Self {
            benign_mean: vec![0.0, 1.0, 0.3, 0.3, 0.5, 0.5, 0.0, 0.0],
            adversarial_mean: vec![0.0, 0.0, 0.3, 0.3, 0.5, 0.5, 0.0, 0.0],
            sigma: 0.1,
        }
    }
}

impl FeatureModel {
    pub fn dim(&self) -> usize {
        self.benign_mean.len()
    }

    pub fn benign_mean(&self) -> FeatureVector {
        FeatureVector(self.benign_mean.clone())
    }

    /// Adds the model's noise to `mean` on the noisy components.
    pub fn sample_around<R: Rng + ?Sized>(&self, mean: &FeatureVector, rng: &mut R) -> FeatureVector {
        let mut out = mean.clone();
        if self.sigma > 0.0 {
            let normal = Normal::new(0.0, self.sigma).expect("sigma is positive and finite");
            for &i in &NOISY_COMPONENTS {
                if i < out.dim() {
                    out.0[i] += normal.sample(rng);
                }
            }
        } else {
            // keep the stream position independent of sigma
            for _ in NOISY_COMPONENTS {
                let _: f64 = rng.random();
            }
        }
        out
    }
}

/// Weight a message carries when benign agents tally visible claims.
pub fn influence_weight(features: &FeatureVector) -> f64 {
    1.0 + features.get(idx::PERSUASIVENESS).max(0.0) + features.get(idx::AUTHORITY).max(0.0)
}

/// Completes a response's feature vector against a rendered context.
///
/// `claim_agreement` is 1 when the response's claim equals the modal claim in
/// the context summary. `context_match` is the fraction of summarized rounds in
/// which the sender already held the current claim. Both are 0 for an empty
/// context or an anonymous response.
pub fn featurize(response: &ResponseRecord, context: &Context) -> FeatureVector {
    let mut out = response.features.clone();
    let lines = parse_summary(&context.dialogue_summary);

    let modal = majority_label(lines.iter().map(|l| l.claim.as_str()));
    let agreement = match modal {
        Some(m) if m == response.answer => 1.0,
        _ => 0.0,
    };
    out.set(idx::CLAIM_AGREEMENT, agreement);

    let mut rounds: Vec<u32> = lines.iter().map(|l| l.round).collect();
    rounds.sort_unstable();
    rounds.dedup();
    let context_match = match response.sender {
        Some(sender) if !rounds.is_empty() => {
            let matching = rounds
                .iter()
                .filter(|&&r| {
                    lines
                        .iter()
                        .any(|l| l.round == r && l.agent == sender && l.claim == response.answer)
                })
                .count();
            matching as f64 / rounds.len() as f64
        }
        _ => 0.0,
    };
    out.set(idx::CONTEXT_MATCH, context_match);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debate::AgentId;

    fn record(answer: &str, sender: Option<usize>) -> ResponseRecord {
        ResponseRecord {
            answer: answer.to_string(),
            features: FeatureModel::default().benign_mean(),
            sender: sender.map(AgentId),
        }
    }

    fn ctx(summary: &str) -> Context {
        Context::new("q", summary, 10_000)
    }

    #[test]
    fn empty_context_zeroes_context_components() {
        let f = featurize(&record("A", Some(1)), &ctx(""));
        assert_eq!(f.get(idx::CLAIM_AGREEMENT), 0.0);
        assert_eq!(f.get(idx::CONTEXT_MATCH), 0.0);
        assert_eq!(f.get(idx::FACTUAL_CONSISTENCY), 1.0);
    }

    #[test]
    fn unanimous_context_claim_agrees() {
        let s = "round 1, agent 0: claim A [benign]\nround 1, agent 2: claim A [benign]";
        let f = featurize(&record("A", Some(1)), &ctx(s));
        assert_eq!(f.get(idx::CLAIM_AGREEMENT), 1.0);
        let f = featurize(&record("B", Some(1)), &ctx(s));
        assert_eq!(f.get(idx::CLAIM_AGREEMENT), 0.0);
    }

    #[test]
    fn context_match_counts_rounds_with_same_claim() {
        // sender 3 claimed B in rounds 1 and 3 out of 4 summarized rounds
        let s = "round 1, agent 3: claim B [x]\n\
                 round 2, agent 3: claim A [x]\n\
                 round 3, agent 3: claim B [x]\n\
                 round 4, agent 3: claim C [x]\n\
                 round 4, agent 1: claim B [x]";
        let f = featurize(&record("B", Some(3)), &ctx(s));
        assert_eq!(f.get(idx::CONTEXT_MATCH), 0.5);
        let anon = featurize(&record("B", None), &ctx(s));
        assert_eq!(anon.get(idx::CONTEXT_MATCH), 0.0);
    }

    #[test]
    fn influence_weight_ignores_negative_components() {
        let mut f = FeatureVector::zeros(DEFAULT_DIM);
        f.set(idx::PERSUASIVENESS, -3.0);
        f.set(idx::AUTHORITY, 0.5);
        assert_eq!(influence_weight(&f), 1.5);
    }
}
