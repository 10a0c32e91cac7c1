//! Contrastive tuple construction.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    adversary_ids, answers_match, jsonl_sha256, summarize, Context, ContrastiveTuple, DatasetManifest,
    LabeledTrajectory, ResponseRecord, DEFAULT_CONTEXT_BUDGET, DEFAULT_PAIR_CAP,
};
use crate::features::{featurize, FeatureModel};
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleConfig {
    /// Maximum (chosen, rejected) pairs kept per round.
    pub pair_cap: usize,
    pub context_budget: usize,
    #[serde(default)]
    pub feature_model: FeatureModel,
}

impl Default for TupleConfig {
    fn default() -> Self {
        Self {
            pair_cap: DEFAULT_PAIR_CAP,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            feature_model: FeatureModel::default(),
        }
    }
}

/// Builds tuples from every round of every trajectory and shuffles them.
///
/// Chosen responses are benign-sender messages whose claim matches the
/// ground truth; rejected responses are adversary-sent or wrong. Pairs are the
/// per-round cross-product, subsampled to `pair_cap`. Returns the tuples and
/// the number of trajectories that yielded none.
pub fn build_tuples(labeled: &[LabeledTrajectory], cfg: &TupleConfig, seed: u64) -> (Vec<ContrastiveTuple>, usize) {
    let mut pair_rng = stream_rng(seed, stream::PAIRS);
    let mut out = Vec::new();
    let mut skipped = 0;
    for l in labeled {
        let t = &l.trajectory;
        let adversaries = adversary_ids(&t.meta);
        let truth = &t.task.ground_truth;
        let before = out.len();
        for (ri, round) in t.messages.rounds().iter().enumerate() {
            let round_no = ri as u32 + 1;
            let chosen: Vec<_> = round
                .iter()
                .filter(|m| !adversaries.contains(&m.sender) && answers_match(&m.answer_claim, truth))
                .collect();
            let rejected: Vec<_> = round
                .iter()
                .filter(|m| adversaries.contains(&m.sender) || !answers_match(&m.answer_claim, truth))
                .collect();
            if chosen.is_empty() || rejected.is_empty() {
                continue;
            }
            let mut pairs: Vec<(usize, usize)> = (0..chosen.len())
                .flat_map(|c| (0..rejected.len()).map(move |r| (c, r)))
                .collect();
            if pairs.len() > cfg.pair_cap {
                pairs.shuffle(&mut pair_rng);
                pairs.truncate(cfg.pair_cap);
                pairs.sort_unstable();
            }
            let context = Context::new(
                t.task.describe(),
                summarize(t.messages.rounds()[..ri].iter().flatten(), cfg.context_budget),
                cfg.context_budget,
            );
            let complete = |r: ResponseRecord| {
                let features = featurize(&r, &context);
                ResponseRecord { features, ..r }
            };
            let reference = complete(ResponseRecord {
                answer: truth.clone(),
                features: cfg.feature_model.benign_mean(),
                sender: None,
            });
            for (i, (c, r)) in pairs.into_iter().enumerate() {
                out.push(ContrastiveTuple {
                    id: format!("{}-r{}-{}", t.id, round_no, i),
                    trajectory_id: t.id.clone(),
                    round: round_no,
                    context: context.clone(),
                    chosen: complete(ResponseRecord::from_message(chosen[c])),
                    rejected: complete(ResponseRecord::from_message(rejected[r])),
                    reference: reference.clone(),
                    attack_kind: t.attack_kind.clone(),
                });
            }
        }
        if out.len() == before {
            skipped += 1;
        }
    }
    out.shuffle(&mut stream_rng(seed, stream::SHUFFLE));
    (out, skipped)
}

/// Tuples plus a manifest whose split fields are still empty.
pub fn build_dataset(
    labeled: &[LabeledTrajectory],
    cfg: &TupleConfig,
    seed: u64,
) -> (Vec<ContrastiveTuple>, DatasetManifest) {
    let (tuples, skipped) = build_tuples(labeled, cfg, seed);
    let domains: BTreeMap<&str, &str> = labeled
        .iter()
        .map(|l| (l.trajectory.id.as_str(), l.trajectory.task.domain_tag.as_str()))
        .collect();
    let mut per_attack = BTreeMap::new();
    let mut per_domain = BTreeMap::new();
    for t in &tuples {
        *per_attack.entry(t.attack_kind.clone()).or_default() += 1;
        let d = domains.get(t.trajectory_id.as_str()).copied().unwrap_or("");
        *per_domain.entry(d.to_string()).or_default() += 1;
    }
    let manifest = DatasetManifest {
        n_tuples: tuples.len(),
        n_trajectories: labeled.len(),
        n_skipped: skipped,
        per_attack,
        per_domain,
        split_seed: seed,
        split_fractions: (1.0, 0.0),
        n_train: tuples.len(),
        n_heldout: 0,
        sha256: jsonl_sha256(&tuples),
    };
    (tuples, manifest)
}
