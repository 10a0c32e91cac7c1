//! Labeled trajectories and the contrastive training set built from them.

pub mod jsonl;
pub mod normalize;
pub mod split;
pub mod summarize;
mod tuples;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::debate::{
    aggregate_majority, AgentId, DialogueHistory, HistoryError, Message, Task, Trajectory, TrajectoryMeta,
};
use crate::features::FeatureVector;

pub use normalize::{answers_match, normalize_answer, NormalizeError};
pub use split::{split, Split, SplitError};
pub use summarize::{parse_summary, summarize};
pub use tuples::{build_dataset, build_tuples, TupleConfig};

pub const DEFAULT_CONTEXT_BUDGET: usize = 4000;
pub const DEFAULT_PAIR_CAP: usize = 8;

/// Task text plus a dialogue summary, bounded by `max_length` characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    #[serde(rename = "task")]
    pub task_description: String,
    #[serde(rename = "summary")]
    pub dialogue_summary: String,
    #[serde(skip, default = "default_budget")]
    pub max_length: usize,
}

fn default_budget() -> usize {
    DEFAULT_CONTEXT_BUDGET
}

impl Context {
    /// Drops the oldest summary lines, then truncates the task text, until the
    /// rendering fits `max_length`.
    pub fn new(task: impl Into<String>, summary: impl Into<String>, max_length: usize) -> Self {
        let mut ctx = Self {
            task_description: task.into(),
            dialogue_summary: summary.into(),
            max_length,
        };
        while ctx.rendered_len() > max_length && !ctx.dialogue_summary.is_empty() {
            ctx.dialogue_summary = match ctx.dialogue_summary.split_once('\n') {
                Some((_, rest)) => rest.to_string(),
                None => String::new(),
            };
        }
        let over = ctx.rendered_len().saturating_sub(max_length);
        if over > 0 {
            let keep = ctx.task_description.chars().count().saturating_sub(over);
            ctx.task_description = ctx.task_description.chars().take(keep).collect();
        }
        ctx
    }

    pub fn render(&self) -> String {
        if self.dialogue_summary.is_empty() {
            self.task_description.clone()
        } else {
            format!("{}\n{}", self.task_description, self.dialogue_summary)
        }
    }

    pub fn rendered_len(&self) -> usize {
        let t = self.task_description.chars().count();
        if self.dialogue_summary.is_empty() {
            t
        } else {
            t + 1 + self.dialogue_summary.chars().count()
        }
    }
}

/// An answer with its feature vector; `sender` is `None` for synthetic
/// references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub answer: String,
    pub features: FeatureVector,
    pub sender: Option<AgentId>,
}

impl ResponseRecord {
    pub fn from_message(m: &Message) -> Self {
        Self {
            answer: m.answer_claim.clone(),
            features: m.features.clone(),
            sender: Some(m.sender),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveTuple {
    pub id: String,
    pub trajectory_id: String,
    pub round: u32,
    pub context: Context,
    pub chosen: ResponseRecord,
    pub rejected: ResponseRecord,
    pub reference: ResponseRecord,
    pub attack_kind: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrajectory {
    pub context: Context,
    pub trajectory: Trajectory,
    /// 1 when the final majority matches the ground truth.
    pub label: u8,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnnotateError {
    #[error("trajectory {0} has no messages")]
    Empty(String),
    #[error("trajectory {id}: {source}")]
    History {
        id: String,
        #[source]
        source: HistoryError,
    },
}

/// Labels a finished trajectory by its final-round majority.
pub fn annotate(trajectory: Trajectory, budget: usize) -> Result<LabeledTrajectory, AnnotateError> {
    let final_answer = aggregate_majority(trajectory.messages.last_round())
        .map_err(|_| AnnotateError::Empty(trajectory.id.clone()))?;
    let label = u8::from(answers_match(&final_answer, &trajectory.task.ground_truth));
    let context = Context::new(
        trajectory.task.describe(),
        summarize(trajectory.messages.messages(), budget),
        budget,
    );
    Ok(LabeledTrajectory {
        context,
        trajectory,
        label,
    })
}

/// Message as stored in labeled-trajectory files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub sender: AgentId,
    pub round: u32,
    pub answer: String,
    pub features: FeatureVector,
    #[serde(default)]
    pub rationale: String,
}

/// Line format of labeled-trajectory JSONL files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub id: String,
    pub task: Task,
    pub label: u8,
    pub attack_kind: String,
    pub messages: Vec<MessageRecord>,
    pub meta: TrajectoryMeta,
}

impl From<&LabeledTrajectory> for LabeledRecord {
    fn from(l: &LabeledTrajectory) -> Self {
        let t = &l.trajectory;
        Self {
            id: t.id.clone(),
            task: t.task.clone(),
            label: l.label,
            attack_kind: t.attack_kind.clone(),
            messages: t
                .messages
                .messages()
                .map(|m| MessageRecord {
                    sender: m.sender,
                    round: m.round,
                    answer: m.answer_claim.clone(),
                    features: m.features.clone(),
                    rationale: m.rationale_digest.clone(),
                })
                .collect(),
            meta: t.meta.clone(),
        }
    }
}

impl LabeledRecord {
    /// Rebuilds the trajectory and re-derives label and context.
    pub fn into_labeled(self, budget: usize) -> Result<LabeledTrajectory, AnnotateError> {
        let messages = self
            .messages
            .into_iter()
            .map(|m| Message {
                sender: m.sender,
                round: m.round,
                answer_claim: m.answer,
                features: m.features,
                rationale_digest: m.rationale,
            })
            .collect();
        let history = DialogueHistory::from_messages(messages).map_err(|source| AnnotateError::History {
            id: self.id.clone(),
            source,
        })?;
        annotate(
            Trajectory {
                id: self.id,
                task: self.task,
                messages: history,
                attack_kind: self.attack_kind,
                meta: self.meta,
            },
            budget,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n_tuples: usize,
    pub n_trajectories: usize,
    /// Trajectories that produced no tuple.
    pub n_skipped: usize,
    pub per_attack: BTreeMap<String, usize>,
    pub per_domain: BTreeMap<String, usize>,
    pub split_seed: u64,
    pub split_fractions: (f64, f64),
    pub n_train: usize,
    pub n_heldout: usize,
    /// SHA-256 of the tuples in JSONL form.
    pub sha256: String,
}

impl DatasetManifest {
    pub fn check(&self) -> Result<(), String> {
        let attack: usize = self.per_attack.values().sum();
        let domain: usize = self.per_domain.values().sum();
        if attack != self.n_tuples || domain != self.n_tuples {
            return Err(format!(
                "per-attack ({attack}) and per-domain ({domain}) counts must equal n_tuples ({})",
                self.n_tuples
            ));
        }
        if self.n_train + self.n_heldout != self.n_tuples {
            return Err("train and held-out sizes do not add up".into());
        }
        if ((self.split_fractions.0 + self.split_fractions.1) - 1.0).abs() > 1e-9 {
            return Err("split fractions do not sum to 1".into());
        }
        if self.n_skipped > self.n_trajectories {
            return Err("more skipped trajectories than trajectories".into());
        }
        Ok(())
    }
}

/// Digest of records serialized one per line.
pub fn jsonl_sha256<T: Serialize>(records: &[T]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(serde_json::to_string(r).expect("records serialize").as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Senders recorded as adversaries either in the metadata or by role.
pub fn adversary_ids(meta: &TrajectoryMeta) -> BTreeSet<AgentId> {
    let mut ids = meta.adversary_ids.clone();
    ids.extend(
        meta.roles
            .iter()
            .filter(|(_, r)| r.as_str() != "benign")
            .map(|(a, _)| *a),
    );
    ids
}
