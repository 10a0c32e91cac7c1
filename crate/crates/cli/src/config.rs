use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use clap::ValueEnum;
use sentinel_core::policy::{PolicyKind, PolicySpec};
use sentinel_core::scenario::ScenarioConfig;
use sentinel_core::scorer::{Fallback, ScorerParams, ScorerSpec, TrainingConfig};
use sentinel_core::tasks::TaskDomain;
use serde::{Deserialize, Serialize};

/// Which scorer backs the sentinels. `on` uses the scenario's own scorer, or
/// trained parameters when a params file is configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DefenseMode {
    On,
    Off,
    Oracle,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
    #[serde(default = "ScenarioConfig::standard")]
    pub scenario: ScenarioConfig,
    #[serde(default = "default_mode")]
    pub defense: DefenseMode,
    /// Trained parameters used when `defense` is `on`.
    #[serde(default)]
    pub scorer_params: Option<PathBuf>,
    #[serde(default)]
    pub remote: RemoteConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub gen_data: GenDataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_mode() -> DefenseMode {
    DefenseMode::On
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteConfig {
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub fallback: Fallback,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            timeout_ms: 5_000,
            fallback: Fallback::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub n_tasks: usize,
    pub domain: TaskDomain,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_tasks: 20,
            domain: TaskDomain::Mcq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDataConfig {
    /// Labeled trajectory JSONL; defaults to `<out>/trajectories.jsonl`.
    pub input: Option<PathBuf>,
    pub pair_cap: usize,
    pub context_budget: usize,
    pub split: (f64, f64),
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self {
            input: None,
            pair_cap: sentinel_core::dataset::DEFAULT_PAIR_CAP,
            context_budget: sentinel_core::dataset::DEFAULT_CONTEXT_BUDGET,
            split: (0.8, 0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Directory holding `train.jsonl` and `heldout.jsonl`; defaults to `<out>`.
    pub input: Option<PathBuf>,
    pub training: TrainingConfig,
    /// Move the bias to the midpoint of mean chosen and rejected scores.
    pub calibrate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            input: None,
            training: TrainingConfig::default(),
            calibrate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub attacks: Vec<String>,
    /// Replicate offsets added to the global seed.
    pub seeds: Vec<u64>,
    pub datasets: Vec<TaskDomain>,
    pub n_tasks: usize,
    pub timing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            attacks: PolicyKind::ADVERSARIAL.iter().map(|k| k.as_str().to_string()).collect(),
            seeds: vec![0, 1, 2],
            datasets: vec![TaskDomain::Mcq, TaskDomain::Math],
            n_tasks: 20,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub attacks: Vec<String>,
    pub n_tasks: usize,
    pub rounds: u32,
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            attacks: PolicyKind::ADVERSARIAL.iter().map(|k| k.as_str().to_string()).collect(),
            n_tasks: 5,
            rounds: 5,
            repeats: 3,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub attack: Option<String>,
    pub defense: Option<DefenseMode>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub scorer_url: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
            None => Ok(serde_json::from_str("{}")?),
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> anyhow::Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(name) = &o.attack {
            if name == "none" {
                self.scenario = self.scenario.without_attack();
            } else {
                let kind = PolicyKind::parse(name)
                    .filter(|k| k.is_adversarial())
                    .with_context(|| format!("unknown attack {name:?}"))?;
                let params = self
                    .scenario
                    .adversary
                    .adversarial_params()
                    .cloned()
                    .unwrap_or_default();
                self.scenario.adversary = PolicySpec::adversarial(kind, params).expect("adversarial kind");
            }
            self.eval.attacks = vec![name.clone()];
            self.bench.attacks = vec![name.clone()];
        }
        if let Some(d) = o.defense {
            self.defense = d;
        }
        if let Some(k) = o.k {
            self.scenario.defense.k = k;
        }
        if let Some(a) = o.alpha {
            self.train.training.align_weight = a;
        }
        if let Some(url) = &o.scorer_url {
            self.remote.endpoint = Some(url.clone());
        }
        Ok(())
    }

    /// The scorer for the configured defense mode; `None` when it is off.
    pub fn scorer_spec(&self) -> anyhow::Result<Option<ScorerSpec>> {
        Ok(match self.defense {
            DefenseMode::Off => None,
            DefenseMode::Oracle => Some(ScorerSpec::Oracle),
            DefenseMode::Remote => {
                let Some(endpoint) = self.remote.endpoint.clone() else {
                    bail!("--defense remote needs an endpoint (remote.endpoint or SENTINEL_SCORER_URL)");
                };
                Some(ScorerSpec::Remote {
                    endpoint,
                    timeout_ms: self.remote.timeout_ms,
                    fallback: self.remote.fallback,
                })
            }
            DefenseMode::On => match &self.scorer_params {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    let params: ScorerParams =
                        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                    Some(ScorerSpec::Trained { params })
                }
                None => Some(self.scenario.scorer.clone()),
            },
        })
    }
}
