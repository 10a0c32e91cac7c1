//! Agent behaviour: the benign belief-update policy and the adversarial
//! policy families.
//!
//! Agents do not produce text. A message is an answer claim plus a feature
//! vector drawn from the [`FeatureModel`]. Benign agents adopt the visible
//! modal claim with a probability that grows with how persuasive its backers
//! look. Adversaries push a wrong label and emit features shifted away from
//! the benign distribution; `stealth` pulls them back toward it.

pub mod remote;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{AgentId, Message, Task, Topology};
use crate::features::{idx, influence_weight, FeatureModel, FeatureVector};
use crate::rng::{stream, stream_rng};

pub use remote::{remote_agent_step, RemoteAgentConfig, RemoteAgentError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Benign,
    Persuasive,
    Netsafe,
    Aitm,
    PromptInjection,
    Psysafe,
    Autoinject,
    Remote,
}

impl PolicyKind {
    pub const ADVERSARIAL: [PolicyKind; 6] = [
        PolicyKind::Aitm,
        PolicyKind::Persuasive,
        PolicyKind::Netsafe,
        PolicyKind::PromptInjection,
        PolicyKind::Psysafe,
        PolicyKind::Autoinject,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Benign => "benign",
            PolicyKind::Persuasive => "persuasive",
            PolicyKind::Netsafe => "netsafe",
            PolicyKind::Aitm => "aitm",
            PolicyKind::PromptInjection => "prompt_injection",
            PolicyKind::Psysafe => "psysafe",
            PolicyKind::Autoinject => "autoinject",
            PolicyKind::Remote => "remote",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let k = match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "benign" => PolicyKind::Benign,
            "persuasive" | "collaboration" => PolicyKind::Persuasive,
            "netsafe" => PolicyKind::Netsafe,
            "aitm" => PolicyKind::Aitm,
            "prompt_injection" => PolicyKind::PromptInjection,
            "psysafe" => PolicyKind::Psysafe,
            "autoinject" => PolicyKind::Autoinject,
            "remote" => PolicyKind::Remote,
            _ => return None,
        };
        Some(k)
    }

    pub fn is_adversarial(&self) -> bool {
        !matches!(self, PolicyKind::Benign | PolicyKind::Remote)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenignParams {
    pub correct_prior: f64,
    pub susceptibility: f64,
    pub noise: f64,
}

impl Default for BenignParams {
    fn default() -> Self {
        Self {
            correct_prior: 0.8,
            susceptibility: 0.5,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialParams {
    /// Wrong answer to push; chosen at debate setup when absent.
    #[serde(default)]
    pub target_label: Option<String>,
    pub persuasion_strength: f64,
    #[serde(default)]
    pub stealth: f64,
    #[serde(default)]
    pub tamper_rate: f64,
    /// Authority spoofing offset used by prompt injection.
    #[serde(default)]
    pub boost: f64,
}

impl Default for AdversarialParams {
    fn default() -> Self {
        Self {
            target_label: None,
            persuasion_strength: 1.0,
            stealth: 0.0,
            tamper_rate: 0.5,
            boost: 1.0,
        }
    }
}

/// Kind plus parameters, as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Benign(BenignParams),
    Persuasive(AdversarialParams),
    Netsafe(AdversarialParams),
    Aitm(AdversarialParams),
    PromptInjection(AdversarialParams),
    Psysafe(AdversarialParams),
    Autoinject(AdversarialParams),
    Remote(RemoteAgentConfig),
}

impl PolicySpec {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicySpec::Benign(_) => PolicyKind::Benign,
            PolicySpec::Persuasive(_) => PolicyKind::Persuasive,
            PolicySpec::Netsafe(_) => PolicyKind::Netsafe,
            PolicySpec::Aitm(_) => PolicyKind::Aitm,
            PolicySpec::PromptInjection(_) => PolicyKind::PromptInjection,
            PolicySpec::Psysafe(_) => PolicyKind::Psysafe,
            PolicySpec::Autoinject(_) => PolicyKind::Autoinject,
            PolicySpec::Remote(_) => PolicyKind::Remote,
        }
    }

    /// Builds an adversarial spec of the given kind.
    pub fn adversarial(kind: PolicyKind, params: AdversarialParams) -> Option<Self> {
        Some(match kind {
            PolicyKind::Persuasive => PolicySpec::Persuasive(params),
            PolicyKind::Netsafe => PolicySpec::Netsafe(params),
            PolicyKind::Aitm => PolicySpec::Aitm(params),
            PolicyKind::PromptInjection => PolicySpec::PromptInjection(params),
            PolicyKind::Psysafe => PolicySpec::Psysafe(params),
            PolicyKind::Autoinject => PolicySpec::Autoinject(params),
            PolicyKind::Benign | PolicyKind::Remote => return None,
        })
    }

    pub fn adversarial_params(&self) -> Option<&AdversarialParams> {
        match self {
            PolicySpec::Persuasive(p)
            | PolicySpec::Netsafe(p)
            | PolicySpec::Aitm(p)
            | PolicySpec::PromptInjection(p)
            | PolicySpec::Psysafe(p)
            | PolicySpec::Autoinject(p) => Some(p),
            PolicySpec::Benign(_) | PolicySpec::Remote(_) => None,
        }
    }

    fn adversarial_params_mut(&mut self) -> Option<&mut AdversarialParams> {
        match self {
            PolicySpec::Persuasive(p)
            | PolicySpec::Netsafe(p)
            | PolicySpec::Aitm(p)
            | PolicySpec::PromptInjection(p)
            | PolicySpec::Psysafe(p)
            | PolicySpec::Autoinject(p) => Some(p),
            PolicySpec::Benign(_) | PolicySpec::Remote(_) => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let prob = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} is not a probability"))
            }
        };
        match self {
            PolicySpec::Benign(b) => {
                prob("correct_prior", b.correct_prior)?;
                prob("susceptibility", b.susceptibility)?;
                prob("noise", b.noise)
            }
            PolicySpec::Remote(r) => {
                if r.endpoint.is_empty() {
                    Err("remote endpoint is empty".into())
                } else {
                    Ok(())
                }
            }
            other => {
                let p = other.adversarial_params().expect("adversarial variant");
                if !(p.persuasion_strength.is_finite() && p.persuasion_strength >= 0.0) {
                    return Err(format!(
                        "persuasion_strength = {} must be finite and >= 0",
                        p.persuasion_strength
                    ));
                }
                if !p.boost.is_finite() {
                    return Err("boost must be finite".into());
                }
                prob("stealth", p.stealth)?;
                prob("tamper_rate", p.tamper_rate)
            }
        }
    }

    /// Short tag naming the policy and its parameters.
    pub fn digest(&self) -> String {
        match self {
            PolicySpec::Benign(b) => format!(
                "benign p={:.2} s={:.2} n={:.2}",
                b.correct_prior, b.susceptibility, b.noise
            ),
            PolicySpec::Remote(r) => format!("remote {}", r.endpoint),
            other => {
                let p = other.adversarial_params().expect("adversarial variant");
                format!(
                    "{} ps={:.2} st={:.2}",
                    other.kind().as_str(),
                    p.persuasion_strength,
                    p.stealth
                )
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Remote(#[from] RemoteAgentError),
    #[error("policy {kind:?} cannot {action}")]
    Unsupported { kind: PolicyKind, action: &'static str },
}

/// What an agent sees when it produces its round-`round` message.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub round: u32,
    pub task: &'a Task,
    /// Visible messages of every earlier round, in history order.
    pub visible: &'a [&'a Message],
    pub topology: &'a Topology,
}

impl StepView<'_> {
    /// Visible messages of the most recent earlier round.
    pub fn latest(&self) -> Vec<&Message> {
        let Some(last) = self.visible.iter().map(|m| m.round).max() else {
            return Vec::new();
        };
        self.visible.iter().copied().filter(|m| m.round == last).collect()
    }
}

/// Expected feature vector of an adversary pushing with `strength`.
///
/// Every component interpolates from the adversarial mean (`stealth = 0`) to
/// the benign mean (`stealth = 1`); persuasiveness is additionally raised by
/// `strength * (1 - stealth)`.
pub fn adversarial_feature_mean(model: &FeatureModel, stealth: f64, strength: f64) -> FeatureVector {
    let mut out: Vec<f64> = model
        .adversarial_mean
        .iter()
        .zip(&model.benign_mean)
        .map(|(a, b)| a + stealth * (b - a))
        .collect();
    if let Some(p) = out.get_mut(idx::PERSUASIVENESS) {
        *p = model.benign_mean[idx::PERSUASIVENESS] + strength * (1.0 - stealth);
    }
    FeatureVector(out)
}

/// Expected feature vector of a prompt-injection adversary.
pub fn prompt_injection_mean(model: &FeatureModel, params: &AdversarialParams) -> FeatureVector {
    let mut mean = adversarial_feature_mean(model, params.stealth, params.persuasion_strength);
    mean.set(idx::AUTHORITY, model.benign_mean[idx::AUTHORITY] + params.boost);
    mean
}

/// Label ranking by count (descending) then label (ascending).
fn ranked_claims<'a>(claims: impl IntoIterator<Item = &'a str>) -> Vec<(&'a str, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in claims {
        *counts.entry(c).or_default() += 1;
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked
}

/// Push target of the adaptive adversary: the runner-up among the counted
/// claims when that is wrong, otherwise the strongest wrong counted claim,
/// otherwise `fallback`.
pub fn autoinject_target(claims: &[&str], ground_truth: &str, fallback: &str) -> String {
    let ranked = ranked_claims(claims.iter().copied());
    if let Some(&(runner_up, _)) = ranked.get(1) {
        if runner_up != ground_truth {
            return runner_up.to_string();
        }
    }
    ranked
        .iter()
        .find(|(l, _)| *l != ground_truth)
        .map(|(l, _)| l.to_string())
        .unwrap_or_else(|| fallback.to_string())
}

/// Fraction of visible peers (other than `me`) whose claim changed between
/// consecutive visible rounds.
pub fn flipper_fraction(visible: &[&Message], me: AgentId) -> f64 {
    let mut by_sender: BTreeMap<AgentId, Vec<(u32, &str)>> = BTreeMap::new();
    for m in visible.iter().filter(|m| m.sender != me) {
        by_sender
            .entry(m.sender)
            .or_default()
            .push((m.round, m.answer_claim.as_str()));
    }
    if by_sender.is_empty() {
        return 0.0;
    }
    let mut flippers = 0;
    for claims in by_sender.values_mut() {
        claims.sort_by_key(|(r, _)| *r);
        if claims.windows(2).any(|w| w[0].1 != w[1].1) {
            flippers += 1;
        }
    }
    flippers as f64 / by_sender.len() as f64
}

/// A stateful agent: its policy, private RNG stream and claim history.
#[derive(Debug, Clone)]
pub struct AgentPolicy {
    id: AgentId,
    spec: PolicySpec,
    model: FeatureModel,
    rng: ChaCha8Rng,
    claims: Vec<String>,
}

impl AgentPolicy {
    /// The RNG stream is derived from `seed` and the agent id.
    pub fn new(id: AgentId, spec: PolicySpec, model: FeatureModel, seed: u64) -> Self {
        Self {
            id,
            spec,
            model,
            rng: stream_rng(seed, stream::AGENT + id.0 as u64),
            claims: Vec::new(),
        }
    }

    pub fn benign(id: AgentId, params: BenignParams, seed: u64) -> Self {
        Self::new(id, PolicySpec::Benign(params), FeatureModel::default(), seed)
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn kind(&self) -> PolicyKind {
        self.spec.kind()
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn model(&self) -> &FeatureModel {
        &self.model
    }

    pub fn claims(&self) -> &[String] {
        &self.claims
    }

    pub fn target_label(&self) -> Option<&str> {
        self.spec.adversarial_params().and_then(|p| p.target_label.as_deref())
    }

    /// Validates parameters against the task and fixes an unset push target
    /// to a wrong option drawn from `setup_rng`.
    pub fn prepare(&mut self, task: &Task, setup_rng: &mut ChaCha8Rng) -> Result<(), String> {
        self.spec.validate()?;
        if self.model.benign_mean.len() != self.model.adversarial_mean.len() {
            return Err("feature model means differ in length".into());
        }
        if !(self.model.sigma.is_finite() && self.model.sigma >= 0.0) {
            return Err(format!("feature noise sigma = {} is invalid", self.model.sigma));
        }
        let wrong: Vec<&String> = task.options.iter().filter(|o| **o != task.ground_truth).collect();
        if let Some(p) = self.spec.adversarial_params_mut() {
            match &p.target_label {
                Some(t) if *t == task.ground_truth => {
                    return Err(format!("target label {t:?} is the ground truth"));
                }
                Some(t) if !task.has_option(t) => {
                    return Err(format!("target label {t:?} is not an option"));
                }
                Some(_) => {}
                None => {
                    let pick = wrong
                        .choose(setup_rng)
                        .ok_or_else(|| "task has no wrong option to push".to_string())?;
                    p.target_label = Some((*pick).clone());
                }
            }
        }
        Ok(())
    }

    pub fn step(&mut self, view: &StepView<'_>) -> Result<Message, PolicyError> {
        match self.spec.kind() {
            PolicyKind::Benign => Ok(self.benign_step(view)),
            PolicyKind::Persuasive | PolicyKind::Aitm => Ok(self.persuasive_step(view)),
            PolicyKind::Netsafe => Ok(self.netsafe_step(view)),
            PolicyKind::PromptInjection | PolicyKind::Psysafe | PolicyKind::Autoinject => Ok(self.ood_step(view)),
            PolicyKind::Remote => {
                let PolicySpec::Remote(cfg) = &self.spec else {
                    unreachable!()
                };
                let cfg = cfg.clone();
                let msg = remote_agent_step(&cfg, self.id, view, &self.model)?;
                self.claims.push(msg.answer_claim.clone());
                Ok(msg)
            }
        }
    }

    fn record_claim(&mut self, claim: &str) -> f64 {
        self.claims.push(claim.to_string());
        let n = self.claims.len();
        if n < 2 {
            return 0.0;
        }
        let flips = self.claims.windows(2).filter(|w| w[0] != w[1]).count();
        flips as f64 / (n - 1) as f64
    }

    fn emit(&mut self, view: &StepView<'_>, claim: String, mean: FeatureVector) -> Message {
        let flip_rate = self.record_claim(&claim);
        let mut features = self.model.sample_around(&mean, &mut self.rng);
        features.set(idx::FLIP_TENDENCY, flip_rate);
        Message {
            sender: self.id,
            round: view.round,
            answer_claim: claim,
            features,
            rationale_digest: self.spec.digest(),
        }
    }

    fn uniform_other(&mut self, task: &Task, exclude: &str) -> Option<String> {
        let others: Vec<&String> = task.options.iter().filter(|o| *o != exclude).collect();
        others.choose(&mut self.rng).map(|s| (*s).clone())
    }

    /// Benign belief update.
    ///
    /// Round 1 claims the ground truth with probability `correct_prior`, else
    /// a uniform wrong option. Later rounds adopt the influence-weighted modal
    /// claim of the latest visible round with probability
    /// `susceptibility * share`. A `noise` flip is applied last.
    pub fn benign_step(&mut self, view: &StepView<'_>) -> Message {
        let PolicySpec::Benign(params) = &self.spec else {
            panic!("benign_step on a {:?} policy", self.kind());
        };
        let params = params.clone();
        let task = view.task;
        let previous = self.claims.last().cloned();
        let mut claim = match previous {
            None => {
                let knows = self.rng.random_bool(params.correct_prior);
                if knows {
                    task.ground_truth.clone()
                } else {
                    self.uniform_other(task, &task.ground_truth)
                        .unwrap_or_else(|| task.ground_truth.clone())
                }
            }
            Some(prev) => {
                let latest = view.latest();
                let draw: f64 = self.rng.random();
                match weighted_modal(&latest) {
                    Some((modal, share)) if draw < params.susceptibility * share => modal,
                    _ => prev,
                }
            }
        };
        let flip: f64 = self.rng.random();
        if flip < params.noise {
            if let Some(other) = self.uniform_other(task, &claim) {
                claim = other;
            }
        }
        let mean = self.model.benign_mean();
        self.emit(view, claim, mean)
    }

    fn adversary(&self) -> AdversarialParams {
        self.spec
            .adversarial_params()
            .cloned()
            .unwrap_or_else(|| panic!("{:?} policy has no adversarial params", self.kind()))
    }

    fn target(&self, params: &AdversarialParams, task: &Task) -> String {
        params.target_label.clone().unwrap_or_else(|| {
            // unprepared policy: any wrong option, else the first option
            task.options
                .iter()
                .find(|o| **o != task.ground_truth)
                .unwrap_or(&task.options[0])
                .clone()
        })
    }

    /// Collaboration-style rhetorical push for the target label.
    pub fn persuasive_step(&mut self, view: &StepView<'_>) -> Message {
        let p = self.adversary();
        let mean = adversarial_feature_mean(&self.model, p.stealth, p.persuasion_strength);
        let claim = self.target(&p, view.task);
        self.emit(view, claim, mean)
    }

    pub fn netsafe_strength(&self, topology: &Topology) -> f64 {
        self.adversary().persuasion_strength * topology.degree_centrality(self.id)
    }

    /// Persuasive push scaled by the adversary's degree centrality.
    pub fn netsafe_step(&mut self, view: &StepView<'_>) -> Message {
        let p = self.adversary();
        let strength = self.netsafe_strength(view.topology);
        let mean = adversarial_feature_mean(&self.model, p.stealth, strength);
        let claim = self.target(&p, view.task);
        self.emit(view, claim, mean)
    }

    /// In-transit tampering; the sender field is kept.
    pub fn aitm_tamper(&mut self, in_transit: &Message) -> Message {
        let p = self.adversary();
        let draw: f64 = self.rng.random();
        if draw >= p.tamper_rate {
            return in_transit.clone();
        }
        let mut out = in_transit.clone();
        if let Some(t) = &p.target_label {
            out.answer_claim = t.clone();
        }
        let shifted = adversarial_feature_mean(&self.model, p.stealth, p.persuasion_strength);
        for (i, v) in out.features.0.iter_mut().enumerate() {
            if i == idx::FLIP_TENDENCY || i == idx::CLAIM_AGREEMENT || i == idx::CONTEXT_MATCH {
                continue;
            }
            *v += shifted.get(i) - self.model.benign_mean.get(i).copied().unwrap_or(0.0);
        }
        out
    }

    /// Out-of-domain families: prompt injection, PsySafe and AutoInject.
    pub fn ood_step(&mut self, view: &StepView<'_>) -> Message {
        let p = self.adversary();
        match self.kind() {
            PolicyKind::PromptInjection => {
                let mean = prompt_injection_mean(&self.model, &p);
                let claim = self.target(&p, view.task);
                self.emit(view, claim, mean)
            }
            PolicyKind::Psysafe => {
                let flippers = flipper_fraction(view.visible, self.id);
                let strength = p.persuasion_strength * (1.0 + flippers);
                let mean = adversarial_feature_mean(&self.model, p.stealth, strength);
                let claim = self.target(&p, view.task);
                self.emit(view, claim, mean)
            }
            PolicyKind::Autoinject => {
                let fallback = self.target(&p, view.task);
                let latest = view.latest();
                let claims: Vec<&str> = latest
                    .iter()
                    .filter(|m| m.sender != self.id)
                    .map(|m| m.answer_claim.as_str())
                    .collect();
                let claim = autoinject_target(&claims, &view.task.ground_truth, &fallback);
                let mean = adversarial_feature_mean(&self.model, p.stealth, p.persuasion_strength);
                self.emit(view, claim, mean)
            }
            other => panic!("ood_step on a {other:?} policy"),
        }
    }
}

/// Influence-weighted modal claim and its share of the total weight.
pub fn weighted_modal(messages: &[&Message]) -> Option<(String, f64)> {
    let mut tally: BTreeMap<&str, f64> = BTreeMap::new();
    let mut total = 0.0;
    for m in messages {
        let w = influence_weight(&m.features);
        *tally.entry(m.answer_claim.as_str()).or_default() += w;
        total += w;
    }
    let mut best: Option<(&str, f64)> = None;
    for (label, w) in tally {
        if best.is_none_or(|(_, b)| w > b) {
            best = Some((label, w));
        }
    }
    best.map(|(l, w)| (l.to_string(), if total > 0.0 { w / total } else { 0.0 }))
}

/// Policies for a whole debate: benign agents everywhere except the given
/// adversary ids, which all run `adversary`.
pub fn assign_policies(
    n_agents: usize,
    adversaries: &BTreeSet<AgentId>,
    benign: &BenignParams,
    adversary: &PolicySpec,
    model: &FeatureModel,
    seed: u64,
) -> BTreeMap<AgentId, AgentPolicy> {
    (0..n_agents)
        .map(AgentId)
        .map(|id| {
            let spec = if adversaries.contains(&id) {
                adversary.clone()
            } else {
                PolicySpec::Benign(benign.clone())
            };
            (id, AgentPolicy::new(id, spec, model.clone(), seed))
        })
        .collect()
}

pub(crate) fn default_timeout() -> Duration {
    Duration::from_secs(30)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn task() -> Task {
        Task::new("q", vec!["A".into(), "B".into(), "C".into(), "D".into()], "A", "mcq").unwrap()
    }

    fn msg(sender: usize, round: u32, claim: &str, f: FeatureVector) -> Message {
        Message {
            sender: AgentId(sender),
            round,
            answer_claim: claim.into(),
            features: f,
            rationale_digest: String::new(),
        }
    }

    fn prepared(spec: PolicySpec, seed: u64) -> AgentPolicy {
        let mut p = AgentPolicy::new(AgentId(0), spec, FeatureModel::default(), seed);
        p.prepare(&task(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        p
    }

    fn view<'a>(round: u32, task: &'a Task, visible: &'a [&'a Message], topo: &'a Topology) -> StepView<'a> {
        StepView {
            round,
            task,
            visible,
            topology: topo,
        }
    }

    #[test]
    fn certain_benign_agent_claims_truth() {
        let t = task();
        let topo = Topology::fully_connected(3);
        let spec = PolicySpec::Benign(BenignParams {
            correct_prior: 1.0,
            susceptibility: 0.5,
            noise: 0.0,
        });
        let mut p = prepared(spec, 3);
        let m = p.step(&view(1, &t, &[], &topo)).unwrap();
        assert_eq!(m.answer_claim, "A");
        assert_eq!(m.round, 1);
    }

    #[test]
    fn immune_benign_agent_never_changes() {
        let t = task();
        let topo = Topology::fully_connected(4);
        let spec = PolicySpec::Benign(BenignParams {
            correct_prior: 0.5,
            susceptibility: 0.0,
            noise: 0.0,
        });
        let loud = adversarial_feature_mean(&FeatureModel::default(), 0.0, 50.0);
        for seed in 0..20 {
            let mut p = prepared(spec.clone(), seed);
            let first = p.step(&view(1, &t, &[], &topo)).unwrap().answer_claim;
            let others: Vec<Message> = (1..4).map(|i| msg(i, 1, "D", loud.clone())).collect();
            let refs: Vec<&Message> = others.iter().collect();
            for round in 2..6 {
                let m = p.step(&view(round, &t, &refs, &topo)).unwrap();
                assert_eq!(m.answer_claim, first);
            }
        }
    }

    #[test]
    fn correct_prior_monte_carlo() {
        let t = task();
        let topo = Topology::fully_connected(1);
        let spec = PolicySpec::Benign(BenignParams {
            correct_prior: 0.8,
            susceptibility: 0.0,
            noise: 0.0,
        });
        let n = 10_000;
        let hits = (0..n)
            .filter(|&seed| {
                let mut p = prepared(spec.clone(), seed);
                p.step(&view(1, &t, &[], &topo)).unwrap().answer_claim == "A"
            })
            .count();
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.8).abs() <= 0.01, "fraction {frac}");
    }

    #[test]
    fn adversarial_means_follow_stealth_and_strength() {
        let model = FeatureModel::default();
        let m0 = adversarial_feature_mean(&model, 0.0, 2.0);
        assert_eq!(
            m0.get(idx::FACTUAL_CONSISTENCY),
            model.adversarial_mean[idx::FACTUAL_CONSISTENCY]
        );
        assert_eq!(
            m0.get(idx::PERSUASIVENESS),
            model.benign_mean[idx::PERSUASIVENESS] + 2.0
        );
        let no_push = adversarial_feature_mean(&model, 0.3, 0.0);
        assert_eq!(no_push.get(idx::PERSUASIVENESS), model.benign_mean[idx::PERSUASIVENESS]);
        let hidden = adversarial_feature_mean(&model, 1.0, 5.0);
        assert_eq!(hidden, model.benign_mean());
    }

    #[test]
    fn netsafe_strength_scales_with_degree() {
        let spec = PolicySpec::Netsafe(AdversarialParams {
            persuasion_strength: 2.0,
            ..Default::default()
        });
        let p = prepared(spec.clone(), 1);
        let star = Topology::star(5, 0).unwrap();
        assert_eq!(p.netsafe_strength(&star), 2.0);
        assert_eq!(p.netsafe_strength(&Topology::ring(5)), 2.0 * 2.0 / 4.0);
        let mut adj = vec![vec![false; 5]; 5];
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)] {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        let leaf = Topology::custom(adj).unwrap();
        assert_eq!(p.netsafe_strength(&leaf), 2.0 / 4.0);
    }

    #[test]
    fn aitm_extremes() {
        let original = msg(3, 1, "A", FeatureModel::default().benign_mean());
        let never = AdversarialParams {
            tamper_rate: 0.0,
            ..Default::default()
        };
        let mut p = prepared(PolicySpec::Aitm(never), 5);
        for _ in 0..100 {
            assert_eq!(p.aitm_tamper(&original), original);
        }
        let always = AdversarialParams {
            tamper_rate: 1.0,
            target_label: Some("C".into()),
            ..Default::default()
        };
        let mut p = prepared(PolicySpec::Aitm(always), 5);
        for _ in 0..100 {
            let t = p.aitm_tamper(&original);
            assert_eq!(t.answer_claim, "C");
            assert_eq!(t.sender, AgentId(3));
            assert!(t.features.get(idx::FACTUAL_CONSISTENCY) < 0.5);
        }
    }

    #[test]
    fn aitm_tamper_rate_monte_carlo() {
        let original = msg(3, 1, "A", FeatureModel::default().benign_mean());
        let params = AdversarialParams {
            tamper_rate: 0.3,
            ..Default::default()
        };
        let mut p = prepared(PolicySpec::Aitm(params), 11);
        let n = 10_000;
        let tampered = (0..n).filter(|_| p.aitm_tamper(&original) != original).count();
        let frac = tampered as f64 / n as f64;
        assert!((frac - 0.3).abs() <= 0.01, "fraction {frac}");
    }

    #[test]
    fn autoinject_runner_up_rule() {
        assert_eq!(autoinject_target(&["A", "A", "B"], "A", "C"), "B");
        // runner-up is the truth: strongest wrong claim instead
        assert_eq!(autoinject_target(&["B", "B", "A"], "A", "C"), "B");
        assert_eq!(autoinject_target(&["A", "A"], "A", "C"), "C");
        assert_eq!(autoinject_target(&[], "A", "D"), "D");
    }

    #[test]
    fn autoinject_pushes_runner_up_in_debate() {
        let t = task();
        let topo = Topology::fully_connected(4);
        let mut p = prepared(PolicySpec::Autoinject(AdversarialParams::default()), 2);
        let b = FeatureModel::default().benign_mean();
        let prev = [msg(1, 1, "A", b.clone()), msg(2, 1, "A", b.clone()), msg(3, 1, "B", b)];
        let refs: Vec<&Message> = prev.iter().collect();
        let m = p.step(&view(2, &t, &refs, &topo)).unwrap();
        assert_eq!(m.answer_claim, "B");
    }

    #[test]
    fn psysafe_without_flips_matches_persuasive() {
        let t = task();
        let topo = Topology::fully_connected(3);
        let params = AdversarialParams {
            target_label: Some("B".into()),
            ..Default::default()
        };
        let b = FeatureModel::default().benign_mean();
        let stable = [msg(1, 1, "A", b.clone()), msg(1, 2, "A", b.clone()), msg(2, 1, "C", b)];
        let refs: Vec<&Message> = stable.iter().collect();
        let mut psy = prepared(PolicySpec::Psysafe(params.clone()), 9);
        let mut per = prepared(PolicySpec::Persuasive(params), 9);
        let a = psy.step(&view(3, &t, &refs, &topo)).unwrap();
        let b = per.step(&view(3, &t, &refs, &topo)).unwrap();
        assert_eq!(a.answer_claim, b.answer_claim);
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn psysafe_detects_flippers() {
        let b = FeatureModel::default().benign_mean();
        let v = [
            msg(1, 1, "A", b.clone()),
            msg(1, 2, "B", b.clone()),
            msg(2, 1, "A", b.clone()),
            msg(2, 2, "A", b),
        ];
        let refs: Vec<&Message> = v.iter().collect();
        assert_eq!(flipper_fraction(&refs, AgentId(0)), 0.5);
    }

    #[test]
    fn prompt_injection_authority() {
        let model = FeatureModel::default();
        let params = AdversarialParams {
            boost: 0.7,
            ..Default::default()
        };
        let mean = prompt_injection_mean(&model, &params);
        assert_eq!(mean.get(idx::AUTHORITY), model.benign_mean[idx::AUTHORITY] + 0.7);
    }

    #[test]
    fn adversaries_never_claim_truth() {
        let t = task();
        let topo = Topology::fully_connected(4);
        let b = FeatureModel::default().benign_mean();
        let prev = [msg(1, 1, "A", b.clone()), msg(2, 1, "B", b.clone()), msg(3, 1, "A", b)];
        let refs: Vec<&Message> = prev.iter().collect();
        for kind in PolicyKind::ADVERSARIAL {
            let spec = PolicySpec::adversarial(kind, AdversarialParams::default()).unwrap();
            for seed in 0..10 {
                let mut p = prepared(spec.clone(), seed);
                let m1 = p.step(&view(1, &t, &[], &topo)).unwrap();
                let m2 = p.step(&view(2, &t, &refs, &topo)).unwrap();
                assert_ne!(m1.answer_claim, "A", "{kind:?}");
                assert_ne!(m2.answer_claim, "A", "{kind:?}");
            }
        }
    }

    #[test]
    fn prepare_rejects_truth_target_and_bad_params() {
        let t = task();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = PolicySpec::Persuasive(AdversarialParams {
            target_label: Some("A".into()),
            ..Default::default()
        });
        let mut p = AgentPolicy::new(AgentId(1), bad, FeatureModel::default(), 0);
        assert!(p.prepare(&t, &mut rng).is_err());
        let bad = PolicySpec::Benign(BenignParams {
            correct_prior: 1.5,
            ..Default::default()
        });
        let mut p = AgentPolicy::new(AgentId(1), bad, FeatureModel::default(), 0);
        assert!(p.prepare(&t, &mut rng).is_err());
        let ok = PolicySpec::Persuasive(AdversarialParams::default());
        let mut p = AgentPolicy::new(AgentId(1), ok, FeatureModel::default(), 0);
        p.prepare(&t, &mut rng).unwrap();
        assert!(p.target_label().is_some_and(|l| l != "A"));
    }

    #[test]
    fn weighted_modal_prefers_persuasive_backers() {
        let b = FeatureModel::default().benign_mean();
        let loud = adversarial_feature_mean(&FeatureModel::default(), 0.0, 10.0);
        let v = [msg(0, 1, "A", b.clone()), msg(1, 1, "A", b), msg(2, 1, "B", loud)];
        let refs: Vec<&Message> = v.iter().collect();
        let (label, share) = weighted_modal(&refs).unwrap();
        assert_eq!(label, "B");
        assert!((share - 11.6 / 14.8).abs() < 1e-12);
    }

    #[test]
    fn spec_json_shape() {
        let spec: PolicySpec =
            serde_json::from_str(r#"{"kind":"prompt_injection","persuasion_strength":1.0,"boost":2.0}"#).unwrap();
        assert_eq!(spec.kind(), PolicyKind::PromptInjection);
        assert_eq!(spec.adversarial_params().unwrap().boost, 2.0);
        assert_eq!(PolicyKind::parse("prompt-injection"), Some(PolicyKind::PromptInjection));
    }
}
