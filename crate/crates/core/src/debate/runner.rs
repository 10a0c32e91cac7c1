use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{
    aggregate_majority, check_consensus, visible_messages, AgentId, ConfigError, DebateConfig, DebateOutcome,
    DialogueHistory, HistoryError, Message, Task, Trajectory, TrajectoryMeta,
};
use crate::defense::{sentinel_step, Defense, SentinelState};
use crate::policy::{AgentPolicy, PolicyError, PolicyKind, StepView};
use crate::rng::{stream, stream_rng};
use crate::scorer::ScoreError;

#[derive(Debug, Error)]
pub enum DebateError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent {agent}: {source}")]
    Policy {
        agent: AgentId,
        #[source]
        source: PolicyError,
    },
    #[error("agent {agent} produced an invalid message: {reason}")]
    InvalidMessage { agent: AgentId, reason: String },
    #[error("sentinel {sentinel}, round {round}: {source}")]
    Score {
        sentinel: AgentId,
        round: u32,
        #[source]
        source: ScoreError,
    },
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// Senders whose messages a sentinel read while producing its round message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentinelInput {
    pub sentinel: AgentId,
    pub round: u32,
    pub senders: BTreeSet<AgentId>,
}

fn trajectory_id(attack: &str, seed: u64, task: &Task, defended: bool) -> String {
    let mut h = Sha256::new();
    h.update(task.query.as_bytes());
    for o in &task.options {
        h.update([0u8]);
        h.update(o.as_bytes());
    }
    let digest = hex::encode(h.finalize());
    let mode = if defended { "d" } else { "u" };
    format!("{attack}-{mode}-{seed}-{}", &digest[..8])
}

fn check_policies(config: &DebateConfig, policies: &BTreeMap<AgentId, AgentPolicy>) -> Result<(), ConfigError> {
    for id in config.agents() {
        let Some(p) = policies.get(&id) else {
            return Err(ConfigError::MissingPolicy(id));
        };
        let declared = config.adversary_ids.contains(&id);
        if declared && p.kind() == PolicyKind::Benign {
            return Err(ConfigError::InvalidPolicy {
                agent: id,
                reason: "declared adversary runs the benign policy".into(),
            });
        }
        if !declared && p.kind().is_adversarial() {
            return Err(ConfigError::InvalidPolicy {
                agent: id,
                reason: format!("{} policy on an agent not declared adversarial", p.kind().as_str()),
            });
        }
    }
    if let Some(&id) = policies.keys().find(|id| id.0 >= config.n_agents) {
        return Err(ConfigError::UnknownPolicy(id));
    }
    Ok(())
}

fn check_message(m: &Message, agent: AgentId, round: u32, task: &Task, dim: usize) -> Result<(), DebateError> {
    let bad = |reason: String| Err(DebateError::InvalidMessage { agent, reason });
    if m.sender != agent {
        return bad(format!("sender field is {}", m.sender));
    }
    if m.round != round {
        return bad(format!("round field is {}, expected {round}", m.round));
    }
    if !task.has_option(&m.answer_claim) {
        return bad(format!("claim {:?} is not an option", m.answer_claim));
    }
    if m.features.dim() != dim || !m.features.is_finite() {
        return bad("feature vector has the wrong length or a non-finite value".into());
    }
    Ok(())
}

/// Runs one debate on `task`.
///
/// Every agent needs a policy. Adversaries without a push target share one
/// wrong option drawn from the debate's setup stream. With a `defense`, each sentinel reads only
/// non-blacklisted senders and runs one defense step per round on the
/// messages it can see.
pub fn run_debate(
    config: &DebateConfig,
    task: &Task,
    mut policies: BTreeMap<AgentId, AgentPolicy>,
    defense: Option<&Defense>,
) -> Result<DebateOutcome, DebateError> {
    config.validate()?;
    check_policies(config, &policies)?;
    let n = config.n_agents;
    if let Some(d) = defense {
        let limit = n.saturating_sub(1);
        if d.config.k >= limit.max(1) && !config.sentinel_ids.is_empty() {
            return Err(ConfigError::KTooLarge {
                k: d.config.k,
                limit,
                n,
            }
            .into());
        }
    }
    // each policy draws from a fresh copy, so untargeted adversaries coordinate
    let setup = stream_rng(config.rng_seed, stream::SETUP);
    for (id, p) in policies.iter_mut() {
        p.prepare(task, &mut setup.clone())
            .map_err(|reason| ConfigError::InvalidPolicy { agent: *id, reason })?;
    }

    let attack_kind = policies
        .values()
        .map(|p| p.kind())
        .find(|k| *k != PolicyKind::Benign)
        .map(|k| k.as_str())
        .unwrap_or("none")
        .to_string();
    let defended = defense.is_some() && !config.sentinel_ids.is_empty();
    let id = trajectory_id(&attack_kind, config.rng_seed, task, defended);
    let dims: BTreeMap<AgentId, usize> = policies.iter().map(|(a, p)| (*a, p.model().dim())).collect();

    let budget = defense
        .map(|d| d.config.context_budget)
        .unwrap_or(crate::dataset::DEFAULT_CONTEXT_BUDGET);
    let mut sentinels: BTreeMap<AgentId, SentinelState> = if defended {
        config
            .sentinel_ids
            .iter()
            .map(|&s| (s, SentinelState::new(s, task, budget)))
            .collect()
    } else {
        BTreeMap::new()
    };
    let aitm: Vec<AgentId> = policies
        .iter()
        .filter(|(_, p)| p.kind() == PolicyKind::Aitm)
        .map(|(a, _)| *a)
        .collect();

    let empty = BTreeSet::new();
    let mut history = DialogueHistory::new();
    let mut per_round_answers = Vec::new();
    let mut sentinel_answers: BTreeMap<AgentId, Vec<String>> = sentinels.keys().map(|&s| (s, Vec::new())).collect();
    let mut audit = Vec::new();
    let mut sentinel_inputs = Vec::new();

    for round in 1..=config.n_rounds {
        let mut messages = Vec::with_capacity(n);
        for (&agent, policy) in policies.iter_mut() {
            let blacklist = sentinels.get(&agent).map(|s| &s.blacklist).unwrap_or(&empty);
            let visible = visible_messages(&history, agent, &config.topology, blacklist);
            if sentinels.contains_key(&agent) {
                sentinel_inputs.push(SentinelInput {
                    sentinel: agent,
                    round,
                    senders: visible.iter().map(|m| m.sender).collect(),
                });
            }
            let view = StepView {
                round,
                task,
                visible: &visible,
                topology: &config.topology,
            };
            let m = policy
                .step(&view)
                .map_err(|source| DebateError::Policy { agent, source })?;
            check_message(&m, agent, round, task, dims[&agent])?;
            messages.push(m);
        }

        for &a in &aitm {
            let policy = policies.get_mut(&a).expect("aitm agent has a policy");
            for m in messages.iter_mut() {
                if config.adversary_ids.contains(&m.sender) || !config.topology.are_adjacent(a, m.sender) {
                    continue;
                }
                *m = policy.aitm_tamper(m);
            }
        }

        history.push_round(messages)?;
        let current = history.last_round();
        per_round_answers.push(aggregate_majority(current).expect("every agent speaks each round"));

        let mut all_settled = !sentinels.is_empty();
        for (&s, state) in sentinels.iter_mut() {
            let d = defense.expect("sentinel states exist only with a defense");
            let seen: Vec<&Message> = current
                .iter()
                .filter(|m| config.topology.can_see(s, m.sender))
                .collect();
            let (record, filtered) =
                sentinel_step(state, round, &seen, d, task, &config.adversary_ids, &id).map_err(|source| {
                    DebateError::Score {
                        sentinel: s,
                        round,
                        source,
                    }
                })?;
            audit.push(record);
            let answer = aggregate_majority(filtered.iter().copied()).expect("the sentinel keeps its own message");
            sentinel_answers.get_mut(&s).expect("initialised").push(answer);
            all_settled &= check_consensus(filtered.iter().copied()).unwrap_or(false);
        }

        if config.early_stop && round < config.n_rounds {
            let settled = if sentinels.is_empty() {
                check_consensus(current).unwrap_or(false)
            } else {
                all_settled
            };
            if settled {
                tracing::debug!(debate = %id, round, "consensus reached");
                break;
            }
        }
    }

    let roles = policies
        .iter()
        .map(|(a, p)| (*a, p.kind().as_str().to_string()))
        .collect();
    let meta = TrajectoryMeta {
        seed: config.rng_seed,
        n_agents: n,
        n_rounds: config.n_rounds,
        topology: config.topology.kind().as_str().to_string(),
        adversary_ids: config.adversary_ids.clone(),
        sentinel_ids: config.sentinel_ids.clone(),
        roles,
        defended,
    };
    let per_sentinel_blacklists = sentinels.into_iter().map(|(s, st)| (s, st.blacklist)).collect();
    Ok(DebateOutcome {
        final_answer: per_round_answers.last().cloned().expect("at least one round"),
        per_round_answers,
        trajectory: Trajectory {
            id,
            task: task.clone(),
            messages: history,
            attack_kind,
            meta,
        },
        per_sentinel_blacklists,
        sentinel_answers,
        audit,
        sentinel_inputs,
    })
}
