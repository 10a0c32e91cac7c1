//! Multi-round debates among simulated agents.
//!
//! A debate runs for up to `n_rounds` rounds. In every round each agent emits
//! one [`Message`] computed from the messages it can see: those of its
//! topology neighbours and itself, minus anything its own blacklist blocks.
//! The system answer after each round is the majority vote over that round's
//! claims.

mod runner;
pub mod topology;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

pub use runner::{run_debate, DebateError, SentinelInput};
pub use topology::{Topology, TopologyError, TopologyKind, TopologySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("task has no options")]
    NoOptions,
    #[error("duplicate option {0:?}")]
    DuplicateOption(String),
    #[error("ground truth {0:?} is not one of the options")]
    GroundTruthNotAnOption(String),
}

/// A query with candidate answers and its hidden ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTask")]
pub struct Task {
    pub query: String,
    pub options: Vec<String>,
    pub ground_truth: String,
    pub domain_tag: String,
}

#[derive(Deserialize)]
struct RawTask {
    query: String,
    options: Vec<String>,
    ground_truth: String,
    #[serde(default)]
    domain_tag: String,
}

impl TryFrom<RawTask> for Task {
    type Error = TaskError;

    fn try_from(r: RawTask) -> Result<Self, Self::Error> {
        Task::new(r.query, r.options, r.ground_truth, r.domain_tag)
    }
}

impl Task {
    pub fn new(
        query: impl Into<String>,
        options: Vec<String>,
        ground_truth: impl Into<String>,
        domain_tag: impl Into<String>,
    ) -> Result<Self, TaskError> {
        let ground_truth = ground_truth.into();
        if options.is_empty() {
            return Err(TaskError::NoOptions);
        }
        let mut seen = BTreeSet::new();
        for o in &options {
            if !seen.insert(o.as_str()) {
                return Err(TaskError::DuplicateOption(o.clone()));
            }
        }
        if !seen.contains(ground_truth.as_str()) {
            return Err(TaskError::GroundTruthNotAnOption(ground_truth));
        }
        Ok(Self {
            query: query.into(),
            options,
            ground_truth,
            domain_tag: domain_tag.into(),
        })
    }

    pub fn has_option(&self, label: &str) -> bool {
        self.options.iter().any(|o| o == label)
    }

    /// Task text as shown to agents and scorers (never includes the answer).
    pub fn describe(&self) -> String {
        format!("task: {} | options: {}", self.query, self.options.join(", "))
    }
}

/// One agent utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: AgentId,
    pub round: u32,
    pub answer_claim: String,
    pub features: FeatureVector,
    pub rationale_digest: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistoryError {
    #[error("round {got} appended after round {last}")]
    NonContiguous { last: u32, got: u32 },
    #[error("agent {0} sent more than one message in round {1}")]
    DuplicateSender(AgentId, u32),
    #[error("message from agent {sender} is tagged round {tagged}, expected {expected}")]
    WrongRoundTag {
        sender: AgentId,
        tagged: u32,
        expected: u32,
    },
}

/// Messages grouped by round; round `t` lives at index `t - 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueHistory {
    rounds: Vec<Vec<Message>>,
}

impl DialogueHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_messages(messages: Vec<Message>) -> Result<Self, HistoryError> {
        let mut grouped: BTreeMap<u32, Vec<Message>> = BTreeMap::new();
        for m in messages {
            grouped.entry(m.round).or_default().push(m);
        }
        let mut h = Self::new();
        for (_, msgs) in grouped {
            h.push_round(msgs)?;
        }
        Ok(h)
    }

    pub fn push_round(&mut self, messages: Vec<Message>) -> Result<(), HistoryError> {
        let expected = self.rounds.len() as u32 + 1;
        let mut senders = BTreeSet::new();
        for m in &messages {
            if m.round != expected {
                if self.rounds.is_empty() || m.round > expected {
                    return Err(HistoryError::NonContiguous {
                        last: expected - 1,
                        got: m.round,
                    });
                }
                return Err(HistoryError::WrongRoundTag {
                    sender: m.sender,
                    tagged: m.round,
                    expected,
                });
            }
            if !senders.insert(m.sender) {
                return Err(HistoryError::DuplicateSender(m.sender, expected));
            }
        }
        self.rounds.push(messages);
        Ok(())
    }

    pub fn n_rounds(&self) -> u32 {
        self.rounds.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.iter().all(|r| r.is_empty())
    }

    /// Messages of round `t` (1-based); empty if out of range.
    pub fn round(&self, t: u32) -> &[Message] {
        t.checked_sub(1)
            .and_then(|i| self.rounds.get(i as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn rounds(&self) -> &[Vec<Message>] {
        &self.rounds
    }

    pub fn last_round(&self) -> &[Message] {
        self.rounds.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.rounds.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("a debate needs at least one agent")]
    NoAgents,
    #[error("a debate needs at least one round")]
    NoRounds,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("agent id {0} out of range for {1} agents")]
    IdOutOfRange(AgentId, usize),
    #[error("agent {0} is both a sentinel and an adversary")]
    SentinelIsAdversary(AgentId),
    #[error("{adversaries} adversaries leave no benign agent among {n}")]
    TooManyAdversaries { adversaries: usize, n: usize },
    #[error("no policy for agent {0}")]
    MissingPolicy(AgentId),
    #[error("policy given for unknown agent {0}")]
    UnknownPolicy(AgentId),
    #[error("isolation threshold k={k} must be below {limit} for {n} agents")]
    KTooLarge { k: usize, limit: usize, n: usize },
    #[error("invalid policy for agent {agent}: {reason}")]
    InvalidPolicy { agent: AgentId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateConfig {
    pub n_agents: usize,
    pub n_rounds: u32,
    pub topology: Topology,
    #[serde(default)]
    pub sentinel_ids: BTreeSet<AgentId>,
    #[serde(default)]
    pub adversary_ids: BTreeSet<AgentId>,
    pub rng_seed: u64,
    /// Stop before `n_rounds` once the deciding views reach unanimity.
    #[serde(default = "default_true")]
    pub early_stop: bool,
}

fn default_true() -> bool {
    true
}

impl DebateConfig {
    pub fn new(n_agents: usize, n_rounds: u32, topology: Topology, rng_seed: u64) -> Self {
        Self {
            n_agents,
            n_rounds,
            topology,
            sentinel_ids: BTreeSet::new(),
            adversary_ids: BTreeSet::new(),
            rng_seed,
            early_stop: true,
        }
    }

    pub fn with_sentinels(mut self, ids: impl IntoIterator<Item = usize>) -> Self {
        self.sentinel_ids = ids.into_iter().map(AgentId).collect();
        self
    }

    pub fn with_adversaries(mut self, ids: impl IntoIterator<Item = usize>) -> Self {
        self.adversary_ids = ids.into_iter().map(AgentId).collect();
        self
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n_agents).map(AgentId)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_agents == 0 {
            return Err(ConfigError::NoAgents);
        }
        if self.n_rounds == 0 {
            return Err(ConfigError::NoRounds);
        }
        self.topology.validate()?;
        if self.topology.n() != self.n_agents {
            return Err(TopologyError::SizeMismatch {
                expected: self.n_agents,
                actual: self.topology.n(),
            }
            .into());
        }
        for &id in self.sentinel_ids.iter().chain(&self.adversary_ids) {
            if id.0 >= self.n_agents {
                return Err(ConfigError::IdOutOfRange(id, self.n_agents));
            }
        }
        if let Some(&id) = self.sentinel_ids.intersection(&self.adversary_ids).next() {
            return Err(ConfigError::SentinelIsAdversary(id));
        }
        if self.adversary_ids.len() >= self.n_agents {
            return Err(ConfigError::TooManyAdversaries {
                adversaries: self.adversary_ids.len(),
                n: self.n_agents,
            });
        }
        Ok(())
    }
}

/// Run parameters recorded alongside a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub n_agents: usize,
    pub n_rounds: u32,
    pub topology: String,
    pub adversary_ids: BTreeSet<AgentId>,
    pub sentinel_ids: BTreeSet<AgentId>,
    pub roles: BTreeMap<AgentId, String>,
    pub defended: bool,
}

/// The complete log of one debate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub task: Task,
    pub messages: DialogueHistory,
    pub attack_kind: String,
    pub meta: TrajectoryMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateOutcome {
    pub final_answer: String,
    /// Majority over every message of each round (the unfiltered view).
    pub per_round_answers: Vec<String>,
    pub trajectory: Trajectory,
    pub per_sentinel_blacklists: BTreeMap<AgentId, BTreeSet<AgentId>>,
    /// Majority over each sentinel's filtered view, per round.
    pub sentinel_answers: BTreeMap<AgentId, Vec<String>>,
    pub audit: Vec<crate::defense::SentinelRoundRecord>,
    pub sentinel_inputs: Vec<SentinelInput>,
}

impl DebateOutcome {
    pub fn rounds_executed(&self) -> u32 {
        self.per_round_answers.len() as u32
    }

    /// A sentinel's blacklist as it stood after round `t` (carried forward
    /// past an early stop).
    pub fn blacklist_after(&self, sentinel: AgentId, t: u32) -> BTreeSet<AgentId> {
        self.audit
            .iter()
            .filter(|r| r.sentinel == sentinel && r.round <= t)
            .max_by_key(|r| r.round)
            .map(|r| r.blacklist_after.iter().copied().collect())
            .unwrap_or_default()
    }
}

/// Most frequent label; ties go to the lexicographically smallest label.
pub fn majority_label<'a>(claims: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in claims {
        *counts.entry(c).or_default() += 1;
    }
    // BTreeMap iterates in ascending label order; keep the first maximum.
    let mut best: Option<(&str, usize)> = None;
    for (label, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((label, n));
        }
    }
    best.map(|(l, _)| l)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no messages to aggregate")]
pub struct EmptyInput;

pub fn aggregate_majority<'a, I>(final_messages: I) -> Result<String, EmptyInput>
where
    I: IntoIterator<Item = &'a Message>,
{
    majority_label(final_messages.into_iter().map(|m| m.answer_claim.as_str()))
        .map(str::to_owned)
        .ok_or(EmptyInput)
}

pub fn check_consensus<'a, I>(round_messages: I) -> Result<bool, EmptyInput>
where
    I: IntoIterator<Item = &'a Message>,
{
    let mut it = round_messages.into_iter();
    let first = it.next().ok_or(EmptyInput)?;
    Ok(it.all(|m| m.answer_claim == first.answer_claim))
}

/// Messages `viewer` may read: its own and its neighbours', minus blacklisted
/// senders, in history order.
pub fn visible_messages<'a>(
    history: &'a DialogueHistory,
    viewer: AgentId,
    topology: &Topology,
    blacklist: &BTreeSet<AgentId>,
) -> Vec<&'a Message> {
    history
        .messages()
        .filter(|m| topology.can_see(viewer, m.sender) && !blacklist.contains(&m.sender))
        .collect()
}
