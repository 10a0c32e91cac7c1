//! Attack × defense × seed × dataset experiment grids with resumable,
//! per-cell result files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::metrics::{accuracy_curve, debate_detection, pooled_detection, AnswerView};
use super::timing::measure_overhead;
use crate::defense::Defense;
use crate::policy::{PolicyKind, PolicySpec};
use crate::scenario::ScenarioConfig;
use crate::scorer::ScorerSpec;
use crate::tasks::{generate_tasks, TaskDomain};

pub const CSV_HEADER: &str =
    "condition,attack,dataset_tag,seed,round,task_accuracy,det_accuracy,fpr,fnr,detect_time_s,overhead_pct";

/// A named defense condition; no scorer means undefended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseSetting {
    pub label: String,
    #[serde(default)]
    pub scorer: Option<ScorerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub scenario: ScenarioConfig,
    /// Attack kinds; `none` removes the adversaries.
    pub attacks: Vec<String>,
    pub defenses: Vec<DefenseSetting>,
    pub seeds: Vec<u64>,
    pub datasets: Vec<TaskDomain>,
    pub n_tasks: usize,
    /// Fill the timing columns (makes the CSV machine-dependent).
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub attack: String,
    pub condition: String,
    pub dataset_tag: String,
    pub seed: u64,
}

impl CellKey {
    pub fn label(&self) -> String {
        format!("{}/{}/{}/{}", self.attack, self.condition, self.dataset_tag, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub condition: String,
    pub attack: String,
    pub dataset_tag: String,
    pub seed: u64,
    pub round: u32,
    pub task_accuracy: f64,
    pub det_accuracy: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub detect_time_s: Option<f64>,
    pub overhead_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub key: CellKey,
    pub hash: String,
    pub rows: Vec<MetricsRow>,
    /// Final-round detection averaged over sentinels, then over debates.
    pub macro_det_accuracy: f64,
    pub macro_fpr: f64,
    pub macro_fnr: f64,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown attack {0:?}")]
    UnknownAttack(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub cells: Vec<CellResult>,
    pub failed: Vec<(CellKey, String)>,
    pub reused: usize,
}

impl GridSpec {
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for attack in &self.attacks {
            for d in &self.defenses {
                for ds in &self.datasets {
                    for &seed in &self.seeds {
                        out.push(CellKey {
                            attack: attack.clone(),
                            condition: d.label.clone(),
                            dataset_tag: ds.as_str().to_string(),
                            seed,
                        });
                    }
                }
            }
        }
        out.sort();
        out
    }

    fn validate(&self) -> Result<(), GridError> {
        for a in &self.attacks {
            if a != "none" && !PolicyKind::parse(a).is_some_and(|k| k.is_adversarial()) {
                return Err(GridError::UnknownAttack(a.clone()));
            }
        }
        Ok(())
    }

    /// Scenario with the cell's attack in place.
    pub fn scenario_for(&self, attack: &str) -> Option<ScenarioConfig> {
        if attack == "none" {
            return Some(self.scenario.without_attack());
        }
        let kind = PolicyKind::parse(attack)?;
        let params = self
            .scenario
            .adversary
            .adversarial_params()
            .cloned()
            .unwrap_or_default();
        let mut s = self.scenario.clone();
        s.adversary = PolicySpec::adversarial(kind, params)?;
        Some(s)
    }

    pub fn cell_hash(&self, key: &CellKey) -> String {
        let setting = self.defenses.iter().find(|d| d.label == key.condition);
        let payload = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "scenario": self.scenario_for(&key.attack),
            "defense": setting,
            "key": key,
            "n_tasks": self.n_tasks,
            "timing": self.timing,
        });
        hex::encode(Sha256::digest(payload.to_string().as_bytes()))
    }
}

fn domain(tag: &str) -> TaskDomain {
    match tag {
        "math" => TaskDomain::Math,
        _ => TaskDomain::Mcq,
    }
}

pub fn run_cell(spec: &GridSpec, key: &CellKey) -> Result<CellResult, String> {
    let scenario = spec
        .scenario_for(&key.attack)
        .ok_or_else(|| format!("unknown attack {:?}", key.attack))?;
    let setting = spec
        .defenses
        .iter()
        .find(|d| d.label == key.condition)
        .ok_or_else(|| format!("unknown defense {:?}", key.condition))?;
    let defense = match &setting.scorer {
        Some(s) => Some(Defense::new(scenario.defense.clone(), s)?),
        None => None,
    };
    let tasks = generate_tasks(domain(&key.dataset_tag), spec.n_tasks, key.seed);
    let outcomes = scenario
        .run_batch(&tasks, key.seed, defense.as_ref())
        .map_err(|e| e.to_string())?;
    let view = if defense.is_some() {
        AnswerView::Sentinel
    } else {
        AnswerView::Global
    };
    let curve = accuracy_curve(&outcomes, view, key.condition.clone());
    let det = pooled_detection(&outcomes).map_err(|e| e.to_string())?;
    let (detect_time_s, overhead_pct) = if spec.timing && defense.is_some() {
        let t = measure_overhead(&scenario, &tasks, key.seed, scenario.n_rounds, 1, defense.as_ref())
            .map_err(|e| e.to_string())?;
        (Some(t.detection_time), Some(t.overhead_pct))
    } else {
        (None, None)
    };
    let rows = curve
        .per_round_accuracy
        .iter()
        .enumerate()
        .map(|(i, &acc)| {
            let c = det.per_round.get(i).copied().unwrap_or_default();
            MetricsRow {
                condition: key.condition.clone(),
                attack: key.attack.clone(),
                dataset_tag: key.dataset_tag.clone(),
                seed: key.seed,
                round: i as u32 + 1,
                task_accuracy: acc,
                det_accuracy: c.accuracy(),
                fpr: c.fpr(),
                fnr: c.fnr(),
                detect_time_s,
                overhead_pct,
            }
        })
        .collect();
    let mut macros = (0.0, 0.0, 0.0);
    for o in &outcomes {
        let d = debate_detection(o).map_err(|e| e.to_string())?;
        macros.0 += d.macro_accuracy;
        macros.1 += d.macro_fpr;
        macros.2 += d.macro_fnr;
    }
    let n = outcomes.len().max(1) as f64;
    Ok(CellResult {
        key: key.clone(),
        hash: spec.cell_hash(key),
        rows,
        macro_det_accuracy: macros.0 / n,
        macro_fpr: macros.1 / n,
        macro_fnr: macros.2 / n,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> GridError + '_ {
    move |source| GridError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), GridError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn metrics_csv(cells: &[CellResult]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in cells.iter().flat_map(|c| &c.rows) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.condition,
            r.attack,
            r.dataset_tag,
            r.seed,
            r.round,
            r.task_accuracy,
            r.det_accuracy,
            r.fpr,
            r.fnr,
            fmt_opt(r.detect_time_s),
            fmt_opt(r.overhead_pct)
        );
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            sd: var.sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub attack: String,
    pub condition: String,
    pub final_task_accuracy: MeanSd,
    pub union_det_accuracy: MeanSd,
    pub union_fpr: MeanSd,
    pub union_fnr: MeanSd,
    pub macro_det_accuracy: MeanSd,
}

fn summarize_cells<'a>(attack: &str, condition: &str, cells: impl Iterator<Item = &'a CellResult>) -> ConditionSummary {
    let cells: Vec<&CellResult> = cells.collect();
    let last = |f: fn(&MetricsRow) -> f64| -> Vec<f64> { cells.iter().filter_map(|c| c.rows.last().map(f)).collect() };
    ConditionSummary {
        attack: attack.to_string(),
        condition: condition.to_string(),
        final_task_accuracy: MeanSd::of(&last(|r| r.task_accuracy)),
        union_det_accuracy: MeanSd::of(&last(|r| r.det_accuracy)),
        union_fpr: MeanSd::of(&last(|r| r.fpr)),
        union_fnr: MeanSd::of(&last(|r| r.fnr)),
        macro_det_accuracy: MeanSd::of(&cells.iter().map(|c| c.macro_det_accuracy).collect::<Vec<_>>()),
    }
}

/// Per (attack, condition) summaries plus a pooled-over-attacks entry per
/// condition, tagged attack `all`.
pub fn summary_json(cells: &[CellResult]) -> serde_json::Value {
    let mut groups: BTreeMap<(String, String), Vec<&CellResult>> = BTreeMap::new();
    let mut pooled: BTreeMap<String, Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        groups
            .entry((c.key.attack.clone(), c.key.condition.clone()))
            .or_default()
            .push(c);
        if c.key.attack != "none" {
            pooled.entry(c.key.condition.clone()).or_default().push(c);
        }
    }
    let per_condition: Vec<_> = groups
        .iter()
        .map(|((a, d), cs)| summarize_cells(a, d, cs.iter().copied()))
        .collect();
    let pooled: Vec<_> = pooled
        .iter()
        .map(|(d, cs)| summarize_cells("all", d, cs.iter().copied()))
        .collect();
    serde_json::json!({ "per_condition": per_condition, "pooled": pooled })
}

/// Mean task accuracy per round for each (attack, condition).
pub fn curves_json(cells: &[CellResult]) -> serde_json::Value {
    let mut groups: BTreeMap<(String, String), Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        groups
            .entry((c.key.attack.clone(), c.key.condition.clone()))
            .or_default()
            .push(c);
    }
    let series: Vec<_> = groups
        .iter()
        .map(|((a, d), cs)| {
            let t = cs.iter().map(|c| c.rows.len()).max().unwrap_or(0);
            let acc: Vec<f64> = (0..t)
                .map(|r| {
                    let v: Vec<f64> = cs
                        .iter()
                        .filter_map(|c| c.rows.get(r).map(|x| x.task_accuracy))
                        .collect();
                    MeanSd::of(&v).mean
                })
                .collect();
            serde_json::json!({
                "attack": a,
                "condition": d,
                "rounds": (1..=t).collect::<Vec<_>>(),
                "task_accuracy": acc,
            })
        })
        .collect();
    serde_json::json!({ "series": series })
}

/// Final-round detection accuracy per (attack, dataset, condition).
pub fn detection_json(cells: &[CellResult], defended: &[String]) -> serde_json::Value {
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for c in cells.iter().filter(|c| defended.contains(&c.key.condition)) {
        if let Some(last) = c.rows.last() {
            groups
                .entry((c.key.attack.clone(), c.key.dataset_tag.clone(), c.key.condition.clone()))
                .or_default()
                .push(last.det_accuracy);
        }
    }
    let bars: Vec<_> = groups
        .iter()
        .map(|((a, ds, d), v)| {
            let s = MeanSd::of(v);
            serde_json::json!({ "attack": a, "dataset_tag": ds, "condition": d, "det_accuracy": s.mean, "sd": s.sd, "n": s.n })
        })
        .collect();
    serde_json::json!({ "bars": bars })
}

fn pretty(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}

/// A finished cell and whether it came from the cache.
type CellOutcome = Result<(CellResult, bool), String>;

/// Runs every cell not already stored under `out_dir/cells`, then writes
/// `metrics.csv`, `summary.json`, `curves.json` and `detection.json`.
pub fn run_grid(spec: &GridSpec, out_dir: &Path, jobs: usize) -> Result<GridReport, GridError> {
    spec.validate()?;
    let cell_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cell_dir).map_err(io_err(&cell_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| GridError::Pool(e.to_string()))?;
    let keys = spec.cells();
    let results: Vec<(CellKey, CellOutcome)> = pool.install(|| {
        keys.par_iter()
            .map(|key| {
                let hash = spec.cell_hash(key);
                let path = cell_dir.join(format!("{hash}.json"));
                if let Ok(bytes) = std::fs::read(&path) {
                    if let Ok(cached) = serde_json::from_slice::<CellResult>(&bytes) {
                        if cached.key == *key {
                            return (key.clone(), Ok((cached, true)));
                        }
                    }
                }
                let r = run_cell(spec, key).and_then(|cell| {
                    let bytes = serde_json::to_vec(&cell).map_err(|e| e.to_string())?;
                    write_atomic(&path, &bytes).map_err(|e| e.to_string())?;
                    Ok((cell, false))
                });
                (key.clone(), r)
            })
            .collect()
    });
    let mut report = GridReport {
        cells: Vec::new(),
        failed: Vec::new(),
        reused: 0,
    };
    for (key, r) in results {
        match r {
            Ok((cell, reused)) => {
                report.reused += usize::from(reused);
                report.cells.push(cell);
            }
            Err(e) => {
                tracing::warn!(cell = %key.label(), error = %e, "grid cell failed");
                report.failed.push((key, e));
            }
        }
    }
    let defended: Vec<String> = spec
        .defenses
        .iter()
        .filter(|d| d.scorer.is_some())
        .map(|d| d.label.clone())
        .collect();
    let outputs = [
        ("metrics.csv", metrics_csv(&report.cells).into_bytes()),
        ("summary.json", pretty(&summary_json(&report.cells))),
        ("curves.json", pretty(&curves_json(&report.cells))),
        ("detection.json", pretty(&detection_json(&report.cells, &defended))),
    ];
    for (name, bytes) in outputs {
        write_atomic(&out_dir.join(name), &bytes)?;
    }
    Ok(report)
}
