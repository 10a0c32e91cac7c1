use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::debate::{DebateError, Task};
use crate::defense::Defense;
use crate::scenario::ScenarioConfig;

/// Wall-clock cost of the defense. The `mean_round_time_*` fields hold the
/// mean time of one debate of `rounds` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub attack: String,
    pub rounds: u32,
    pub mean_round_time_without: f64,
    pub mean_round_time_with: f64,
    pub detection_time: f64,
    pub overhead_pct: f64,
}

impl TimingReport {
    pub fn from_times(attack: impl Into<String>, rounds: u32, without: f64, with: f64) -> Self {
        Self {
            attack: attack.into(),
            rounds,
            mean_round_time_without: without,
            mean_round_time_with: with,
            detection_time: with - without,
            overhead_pct: if without > 0.0 {
                100.0 * (with - without) / without
            } else {
                0.0
            },
        }
    }
}

fn time_batch(
    scenario: &ScenarioConfig,
    tasks: &[Task],
    seed: u64,
    defense: Option<&Defense>,
) -> Result<Duration, DebateError> {
    let start = Instant::now();
    for (i, t) in tasks.iter().enumerate() {
        std::hint::black_box(scenario.run(t, seed, i as u64, defense)?);
    }
    Ok(start.elapsed())
}

/// Times the task batch without and with `defense` on the same seeds, forced
/// to run all `rounds` rounds. Runs alternate and the fastest of `repeats`
/// is kept for each side. Passing `None` times the undefended run twice.
pub fn measure_overhead(
    scenario: &ScenarioConfig,
    tasks: &[Task],
    seed: u64,
    rounds: u32,
    repeats: usize,
    defense: Option<&Defense>,
) -> Result<TimingReport, DebateError> {
    let mut s = scenario.clone();
    s.n_rounds = rounds;
    s.early_stop = false;
    let n = tasks.len().max(1) as f64;
    let (mut without, mut with) = (Duration::MAX, Duration::MAX);
    for _ in 0..repeats.max(1) {
        without = without.min(time_batch(&s, tasks, seed, None)?);
        with = with.min(time_batch(&s, tasks, seed, defense)?);
    }
    Ok(TimingReport::from_times(
        s.adversary.kind().as_str(),
        rounds,
        without.as_secs_f64() / n,
        with.as_secs_f64() / n,
    ))
}

/// CSV with one row per attack: `attack,without_s,with_s,detect_time_s,overhead_pct`.
pub fn overhead_csv(reports: &[TimingReport]) -> String {
    let mut out = String::from("attack,without_s,with_s,detect_time_s,overhead_pct\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.4}",
            r.attack, r.mean_round_time_without, r.mean_round_time_with, r.detection_time, r.overhead_pct
        );
    }
    out
}
