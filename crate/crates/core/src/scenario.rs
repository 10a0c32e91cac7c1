//! File-level description of a debate population: sizes, roles, policies and
//! the sentinel defense.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::debate::{run_debate, AgentId, DebateConfig, DebateError, DebateOutcome, Task, TopologySpec};
use crate::defense::{Defense, DefenseConfig};
use crate::features::FeatureModel;
use crate::policy::{AdversarialParams, AgentPolicy, BenignParams, PolicySpec};
use crate::rng::{derive_seed, stream};
use crate::scorer::ScorerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub n_rounds: u32,
    #[serde(default = "default_topology")]
    pub topology: TopologySpec,
    #[serde(default)]
    pub sentinel_ids: BTreeSet<AgentId>,
    #[serde(default)]
    pub adversary_ids: BTreeSet<AgentId>,
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default)]
    pub benign: BenignParams,
    #[serde(default = "default_adversary")]
    pub adversary: PolicySpec,
    /// Per-agent policies that replace the role default.
    #[serde(default)]
    pub overrides: BTreeMap<AgentId, PolicySpec>,
    #[serde(default)]
    pub feature_model: FeatureModel,
    #[serde(default)]
    pub defense: DefenseConfig,
    #[serde(default = "default_scorer")]
    pub scorer: ScorerSpec,
}

fn default_topology() -> TopologySpec {
    TopologySpec::FullyConnected
}

fn default_true() -> bool {
    true
}

fn default_adversary() -> PolicySpec {
    PolicySpec::Persuasive(AdversarialParams::default())
}

fn default_scorer() -> ScorerSpec {
    ScorerSpec::Oracle
}

impl ScenarioConfig {
    /// Eight agents, sentinel 0, adversaries 5 to 7, persuasive attack, oracle
    /// scorer with k = 2.
    pub fn standard() -> Self {
        Self {
            n_agents: 8,
            n_rounds: 5,
            topology: TopologySpec::FullyConnected,
            sentinel_ids: BTreeSet::from([AgentId(0)]),
            adversary_ids: [5, 6, 7].into_iter().map(AgentId).collect(),
            early_stop: true,
            benign: BenignParams::default(),
            adversary: default_adversary(),
            overrides: BTreeMap::new(),
            feature_model: FeatureModel::default(),
            defense: DefenseConfig {
                k: 2,
                ..DefenseConfig::default()
            },
            scorer: ScorerSpec::Oracle,
        }
    }

    /// The same population with every agent benign.
    pub fn without_attack(&self) -> Self {
        let mut s = self.clone();
        s.adversary_ids.clear();
        s.overrides.retain(|_, p| !p.kind().is_adversarial());
        s
    }

    pub fn debate_config(&self, seed: u64) -> Result<DebateConfig, DebateError> {
        let topology = self
            .topology
            .build(self.n_agents)
            .map_err(|e| DebateError::Config(e.into()))?;
        Ok(DebateConfig {
            n_agents: self.n_agents,
            n_rounds: self.n_rounds,
            topology,
            sentinel_ids: self.sentinel_ids.clone(),
            adversary_ids: self.adversary_ids.clone(),
            rng_seed: seed,
            early_stop: self.early_stop,
        })
    }

    pub fn policies(&self, seed: u64) -> BTreeMap<AgentId, AgentPolicy> {
        (0..self.n_agents)
            .map(AgentId)
            .map(|id| {
                let spec = self.overrides.get(&id).cloned().unwrap_or_else(|| {
                    if self.adversary_ids.contains(&id) {
                        self.adversary.clone()
                    } else {
                        PolicySpec::Benign(self.benign.clone())
                    }
                });
                (id, AgentPolicy::new(id, spec, self.feature_model.clone(), seed))
            })
            .collect()
    }

    pub fn build_defense(&self) -> Result<Defense, String> {
        Defense::new(self.defense.clone(), &self.scorer)
    }

    /// Runs debate number `index` of a batch seeded by `base_seed`.
    pub fn run(
        &self,
        task: &Task,
        base_seed: u64,
        index: u64,
        defense: Option<&Defense>,
    ) -> Result<DebateOutcome, DebateError> {
        let seed = debate_seed(base_seed, index);
        run_debate(&self.debate_config(seed)?, task, self.policies(seed), defense)
    }

    /// Runs one debate per task.
    pub fn run_batch(
        &self,
        tasks: &[Task],
        base_seed: u64,
        defense: Option<&Defense>,
    ) -> Result<Vec<DebateOutcome>, DebateError> {
        tasks
            .iter()
            .enumerate()
            .map(|(i, t)| self.run(t, base_seed, i as u64, defense))
            .collect()
    }
}

pub fn debate_seed(base: u64, index: u64) -> u64 {
    derive_seed(base, stream::DEBATE + index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_shape() {
        let json = r#"{
            "n_agents": 4, "n_rounds": 3,
            "topology": {"kind": "ring"},
            "sentinel_ids": [0], "adversary_ids": [3],
            "adversary": {"kind": "netsafe", "persuasion_strength": 2.0},
            "overrides": {"2": {"kind": "benign", "correct_prior": 1.0, "susceptibility": 0.0, "noise": 0.0}},
            "defense": {"k": 1},
            "scorer": {"kind": "oracle"}
        }"#;
        let s: ScenarioConfig = serde_json::from_str(json).unwrap();
        let pol = s.policies(1);
        assert_eq!(pol[&AgentId(3)].kind(), crate::policy::PolicyKind::Netsafe);
        assert_eq!(s.debate_config(1).unwrap().topology.degree(AgentId(0)), 2);
        let d = s.build_defense().unwrap();
        let task = crate::tasks::generate_tasks(crate::tasks::TaskDomain::Mcq, 1, 0).remove(0);
        let out = s.run(&task, 1, 0, Some(&d)).unwrap();
        assert!(out.rounds_executed() <= 3);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"n_agents":1,"n_rounds":1,"bogus":1}"#).is_err());
    }

    #[test]
    fn baseline_has_no_adversaries() {
        let s = ScenarioConfig::standard().without_attack();
        assert!(s.adversary_ids.is_empty());
        assert!(s.policies(0).values().all(|p| !p.kind().is_adversarial()));
    }
}
