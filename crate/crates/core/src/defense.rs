//! Sentinel-side filtering: score each round, blacklist the lowest-scored
//! senders, and keep a summarized context of what survived.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{summarize, Context, DEFAULT_CONTEXT_BUDGET};
use crate::debate::{AgentId, Message, Task};
use crate::scorer::{CreditScorer, RoundInput, ScoreError, ScorerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseConfig {
    /// Maximum number of senders blacklisted per round.
    pub k: usize,
    /// Keep already-blacklisted senders in the scored pool.
    #[serde(default)]
    pub score_blacklisted: bool,
    /// Skip selection when it would blacklist every remaining candidate.
    #[serde(default)]
    pub stop_when_all_blacklistable: bool,
    /// When set, only candidates scoring strictly below it can be selected.
    #[serde(default)]
    pub elimination_threshold: Option<f64>,
    #[serde(default = "default_budget")]
    pub context_budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_CONTEXT_BUDGET
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            k: 1,
            score_blacklisted: false,
            stop_when_all_blacklistable: false,
            elimination_threshold: None,
            context_budget: DEFAULT_CONTEXT_BUDGET,
        }
    }
}

/// A defense configuration bound to a scorer instance.
#[derive(Clone)]
pub struct Defense {
    pub config: DefenseConfig,
    pub scorer: Arc<dyn CreditScorer>,
}

impl std::fmt::Debug for Defense {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Defense")
            .field("config", &self.config)
            .field("scorer", &self.scorer.name())
            .finish()
    }
}

impl Defense {
    pub fn new(config: DefenseConfig, spec: &ScorerSpec) -> Result<Self, String> {
        Ok(Self {
            config,
            scorer: spec.build()?,
        })
    }

    pub fn with_scorer(config: DefenseConfig, scorer: Arc<dyn CreditScorer>) -> Self {
        Self { config, scorer }
    }
}

/// The initial context followed by one summary block per round, evicting the
/// oldest blocks once the rendering exceeds the budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextState {
    pub c0: String,
    pub blocks: Vec<(u32, String)>,
    pub budget: usize,
}

impl ContextState {
    pub fn new(c0: impl Into<String>, budget: usize) -> Self {
        Self {
            c0: c0.into(),
            blocks: Vec::new(),
            budget,
        }
    }

    fn block_text(round: u32, h: &str) -> String {
        if h.is_empty() {
            format!("[round {round}]")
        } else {
            format!("[round {round}]\n{h}")
        }
    }

    pub fn summary(&self) -> String {
        self.blocks
            .iter()
            .map(|(t, h)| Self::block_text(*t, h))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn render(&self) -> String {
        let s = self.summary();
        if s.is_empty() {
            self.c0.clone()
        } else {
            format!("{}\n{}", self.c0, s)
        }
    }

    pub fn rendered_len(&self) -> usize {
        self.render().chars().count()
    }

    pub fn push(&mut self, round: u32, h: String) {
        self.blocks.push((round, h));
        while self.blocks.len() > 1 && self.rendered_len() > self.budget {
            self.blocks.remove(0);
        }
    }

    pub fn as_context(&self) -> Context {
        Context::new(self.c0.clone(), self.summary(), self.budget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentinelState {
    pub owner: AgentId,
    pub blacklist: BTreeSet<AgentId>,
    pub context: ContextState,
    /// Last completed round.
    pub round: u32,
}

impl SentinelState {
    pub fn new(owner: AgentId, task: &Task, budget: usize) -> Self {
        Self {
            owner,
            blacklist: BTreeSet::new(),
            context: ContextState::new(task.describe(), budget),
            round: 0,
        }
    }
}

/// Candidate scores with their ascending order (ties by id).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundScores {
    pub entries: Vec<(AgentId, f64)>,
    pub sorted_order: Vec<usize>,
}

impl RoundScores {
    pub fn new(entries: Vec<(AgentId, f64)>) -> Self {
        let mut sorted_order: Vec<usize> = (0..entries.len()).collect();
        sorted_order.sort_by(|&a, &b| {
            entries[a]
                .1
                .total_cmp(&entries[b].1)
                .then(entries[a].0.cmp(&entries[b].0))
        });
        Self { entries, sorted_order }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries scoring strictly below `threshold`.
    pub fn below(&self, threshold: f64) -> RoundScores {
        RoundScores::new(self.entries.iter().copied().filter(|(_, s)| *s < threshold).collect())
    }
}

/// Candidates are the responses of everyone but the owner, minus
/// blacklisted senders unless `score_blacklisted` is set.
pub fn candidates<'a>(state: &SentinelState, responses: &[&'a Message], cfg: &DefenseConfig) -> Vec<&'a Message> {
    responses
        .iter()
        .copied()
        .filter(|m| m.sender != state.owner && (cfg.score_blacklisted || !state.blacklist.contains(&m.sender)))
        .collect()
}

pub fn score_round(
    state: &SentinelState,
    candidates: &[&Message],
    scorer: &dyn CreditScorer,
    task: &Task,
    adversaries: &BTreeSet<AgentId>,
) -> Result<RoundScores, ScoreError> {
    if candidates.is_empty() {
        return Ok(RoundScores::new(Vec::new()));
    }
    let context = state.context.as_context();
    let scores = scorer.score_round(&RoundInput {
        task,
        context: &context,
        candidates,
        adversaries,
    })?;
    Ok(RoundScores::new(
        candidates.iter().map(|m| m.sender).zip(scores).collect(),
    ))
}

pub fn select_bottom_k(scores: &RoundScores, k: usize) -> BTreeSet<AgentId> {
    scores
        .sorted_order
        .iter()
        .take(k)
        .map(|&i| scores.entries[i].0)
        .collect()
}

pub fn update_blacklist(state: &mut SentinelState, new: &BTreeSet<AgentId>) {
    state
        .blacklist
        .extend(new.iter().copied().filter(|&a| a != state.owner));
}

pub fn filter_responses<'a>(responses: &[&'a Message], blacklist: &BTreeSet<AgentId>) -> Vec<&'a Message> {
    responses
        .iter()
        .copied()
        .filter(|m| !blacklist.contains(&m.sender))
        .collect()
}

pub fn update_context(state: &mut SentinelState, round: u32, filtered: &[&Message]) {
    let h = summarize(filtered.iter().copied(), state.context.budget);
    state.context.push(round, h);
    state.round = round;
}

/// One audit line per sentinel-round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentinelRoundRecord {
    pub debate_id: String,
    pub sentinel: AgentId,
    pub round: u32,
    pub scores: Vec<(AgentId, f64)>,
    pub selected: Vec<AgentId>,
    pub blacklist_after: Vec<AgentId>,
}

/// Score, select, blacklist, filter and summarize. `responses` are the
/// round's messages the owner can see, its own included; the returned list is
/// what the owner keeps.
pub fn sentinel_step<'a>(
    state: &mut SentinelState,
    round: u32,
    responses: &[&'a Message],
    defense: &Defense,
    task: &Task,
    adversaries: &BTreeSet<AgentId>,
    debate_id: &str,
) -> Result<(SentinelRoundRecord, Vec<&'a Message>), ScoreError> {
    let cfg = &defense.config;
    let pool = candidates(state, responses, cfg);
    let scores = score_round(state, &pool, defense.scorer.as_ref(), task, adversaries)?;
    let eligible = match cfg.elimination_threshold {
        Some(th) => scores.below(th),
        None => scores.clone(),
    };
    let mut selected = select_bottom_k(&eligible, cfg.k);
    if cfg.stop_when_all_blacklistable {
        let remaining: BTreeSet<AgentId> = pool
            .iter()
            .map(|m| m.sender)
            .filter(|a| !state.blacklist.contains(a))
            .collect();
        if !remaining.is_empty() && remaining.is_subset(&selected) {
            selected.clear();
        }
    }
    update_blacklist(state, &selected);
    let filtered = filter_responses(responses, &state.blacklist);
    update_context(state, round, &filtered);
    let record = SentinelRoundRecord {
        debate_id: debate_id.to_string(),
        sentinel: state.owner,
        round,
        scores: scores.entries.clone(),
        selected: selected.into_iter().collect(),
        blacklist_after: state.blacklist.iter().copied().collect(),
    };
    Ok((record, filtered))
}
