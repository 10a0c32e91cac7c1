use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context as _};
use sentinel_core::dataset::jsonl::{read_jsonl, write_jsonl};
use sentinel_core::dataset::{annotate, build_dataset, split, ContrastiveTuple, LabeledRecord, TupleConfig};
use sentinel_core::defense::{Defense, SentinelRoundRecord};
use sentinel_core::eval::grid::summary_json;
use sentinel_core::eval::{accuracy_curve, measure_overhead, overhead_csv, pooled_detection, run_grid, AnswerView};
use sentinel_core::eval::{DefenseSetting, GridSpec};
use sentinel_core::policy::{PolicyKind, PolicySpec};
use sentinel_core::scorer::{calibrate_bias, TrainingHistory};
use sentinel_core::tasks::generate_tasks;
use serde::Serialize;

use crate::config::{DefenseMode, RunConfig};

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn echo_config(cfg: &RunConfig, command: &str, jobs: usize) -> anyhow::Result<()> {
    let doc = serde_json::json!({
        "tool": "sentinel",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "jobs": jobs,
        "config": cfg,
    });
    write_json(&cfg.out.join("effective_config.json"), &doc)
}

fn defense(cfg: &RunConfig) -> anyhow::Result<Option<Defense>> {
    cfg.scorer_spec()?
        .map(|spec| Defense::new(cfg.scenario.defense.clone(), &spec))
        .transpose()
        .map_err(|e| anyhow!(e))
}

pub fn simulate(cfg: &RunConfig) -> anyhow::Result<()> {
    let tasks = generate_tasks(cfg.simulate.domain, cfg.simulate.n_tasks, cfg.seed);
    let def = defense(cfg)?;
    let outcomes = cfg.scenario.run_batch(&tasks, cfg.seed, def.as_ref())?;
    let budget = cfg.gen_data.context_budget;
    let records = outcomes
        .iter()
        .map(|o| annotate(o.trajectory.clone(), budget).map(|l| LabeledRecord::from(&l)))
        .collect::<Result<Vec<_>, _>>()?;
    let audit: Vec<&SentinelRoundRecord> = outcomes.iter().flat_map(|o| &o.audit).collect();
    write_jsonl(&cfg.out.join("trajectories.jsonl"), &records)?;
    write_jsonl(&cfg.out.join("audit.jsonl"), &audit)?;

    let curve = accuracy_curve(&outcomes, AnswerView::Global, "global");
    let last = curve.per_round_accuracy.last().copied().unwrap_or(0.0);
    println!("{} debates, final task accuracy {last:.4}", outcomes.len());
    if def.is_some() && !cfg.scenario.sentinel_ids.is_empty() {
        let filtered = accuracy_curve(&outcomes, AnswerView::Sentinel, "sentinel");
        let d = pooled_detection(&outcomes)?;
        println!(
            "sentinel-view accuracy {:.4}, detection accuracy {:.4}, FPR {:.4}, FNR {:.4}",
            filtered.per_round_accuracy.last().copied().unwrap_or(0.0),
            d.accuracy,
            d.fpr,
            d.fnr
        );
    }
    Ok(())
}

pub fn gen_data(cfg: &RunConfig) -> anyhow::Result<()> {
    let g = &cfg.gen_data;
    let input = g.input.clone().unwrap_or_else(|| cfg.out.join("trajectories.jsonl"));
    let records: Vec<LabeledRecord> = read_jsonl(&input)?;
    let labeled = records
        .into_iter()
        .map(|r| r.into_labeled(g.context_budget))
        .collect::<Result<Vec<_>, _>>()?;
    let tcfg = TupleConfig {
        pair_cap: g.pair_cap,
        context_budget: g.context_budget,
        feature_model: cfg.scenario.feature_model.clone(),
    };
    let (tuples, mut manifest) = build_dataset(&labeled, &tcfg, cfg.seed);
    let sp = split(&tuples, g.split, cfg.seed)?;
    manifest.split_fractions = g.split;
    manifest.n_train = sp.train.len();
    manifest.n_heldout = sp.heldout.len();
    manifest.check().map_err(|e| anyhow!(e))?;
    write_jsonl(&cfg.out.join("tuples.jsonl"), &tuples)?;
    write_jsonl(&cfg.out.join("train.jsonl"), &sp.train)?;
    write_jsonl(&cfg.out.join("heldout.jsonl"), &sp.heldout)?;
    write_json(&cfg.out.join("manifest.json"), &manifest)?;
    println!(
        "{} tuples from {} trajectories ({} skipped); {} train, {} held out",
        manifest.n_tuples, manifest.n_trajectories, manifest.n_skipped, manifest.n_train, manifest.n_heldout
    );
    Ok(())
}

fn history_csv(h: &TrainingHistory) -> String {
    let mut out = String::from("epoch,total_loss,pair_loss,align_loss,heldout_accuracy\n");
    for e in 0..h.total_loss.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e + 1,
            h.total_loss[e],
            h.pair_loss[e],
            h.align_loss[e],
            h.heldout_accuracy[e]
        );
    }
    out
}

pub fn train(cfg: &RunConfig) -> anyhow::Result<()> {
    let dir = cfg.train.input.clone().unwrap_or_else(|| cfg.out.clone());
    let train_set: Vec<ContrastiveTuple> = read_jsonl(&dir.join("train.jsonl"))?;
    let heldout_path = dir.join("heldout.jsonl");
    let heldout: Vec<ContrastiveTuple> = if heldout_path.exists() {
        read_jsonl(&heldout_path)?
    } else {
        Vec::new()
    };
    let mut training = cfg.train.training.clone();
    training.seed = cfg.seed;
    let (mut params, history) = sentinel_core::scorer::train(&train_set, &heldout, &training)?;
    if cfg.train.calibrate {
        calibrate_bias(&mut params, &train_set);
    }
    write_json(&cfg.out.join("scorer.json"), &params)?;
    std::fs::write(cfg.out.join("history.csv"), history_csv(&history))?;
    println!(
        "{} epochs, final loss {:.6}, held-out ranking accuracy {:.4}",
        history.total_loss.len(),
        history.total_loss.last().copied().unwrap_or(f64::NAN),
        history.heldout_accuracy.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn mode_label(m: DefenseMode) -> &'static str {
    match m {
        DefenseMode::On => "on",
        DefenseMode::Off => "off",
        DefenseMode::Oracle => "oracle",
        DefenseMode::Remote => "remote",
    }
}

pub fn eval(cfg: &RunConfig, jobs: usize) -> anyhow::Result<()> {
    let mut defenses = vec![DefenseSetting {
        label: "off".into(),
        scorer: None,
    }];
    if let Some(spec) = cfg.scorer_spec()? {
        defenses.push(DefenseSetting {
            label: mode_label(cfg.defense).into(),
            scorer: Some(spec),
        });
    }
    let spec = GridSpec {
        scenario: cfg.scenario.clone(),
        attacks: cfg.eval.attacks.clone(),
        defenses,
        seeds: cfg.eval.seeds.iter().map(|s| cfg.seed.wrapping_add(*s)).collect(),
        datasets: cfg.eval.datasets.clone(),
        n_tasks: cfg.eval.n_tasks,
        timing: cfg.eval.timing,
    };
    let report = run_grid(&spec, &cfg.out, jobs)?;
    let summary = summary_json(&report.cells);
    println!("attack,condition,final_task_accuracy,det_accuracy,fpr,fnr");
    for row in summary["per_condition"].as_array().into_iter().flatten() {
        println!(
            "{},{},{:.4},{:.4},{:.4},{:.4}",
            row["attack"].as_str().unwrap_or(""),
            row["condition"].as_str().unwrap_or(""),
            row["final_task_accuracy"]["mean"].as_f64().unwrap_or(f64::NAN),
            row["union_det_accuracy"]["mean"].as_f64().unwrap_or(f64::NAN),
            row["union_fpr"]["mean"].as_f64().unwrap_or(f64::NAN),
            row["union_fnr"]["mean"].as_f64().unwrap_or(f64::NAN),
        );
    }
    if !report.failed.is_empty() {
        for (key, why) in &report.failed {
            eprintln!("failed cell {}: {why}", key.label());
        }
        bail!(
            "{} of {} grid cells failed",
            report.failed.len(),
            report.failed.len() + report.cells.len()
        );
    }
    Ok(())
}

pub fn bench(cfg: &RunConfig) -> anyhow::Result<()> {
    let def = defense(cfg)?;
    let tasks = generate_tasks(cfg.simulate.domain, cfg.bench.n_tasks, cfg.seed);
    let mut reports = Vec::new();
    for name in &cfg.bench.attacks {
        let kind = PolicyKind::parse(name)
            .filter(|k| k.is_adversarial())
            .with_context(|| format!("unknown attack {name:?}"))?;
        let mut s = cfg.scenario.clone();
        let params = s.adversary.adversarial_params().cloned().unwrap_or_default();
        s.adversary = PolicySpec::adversarial(kind, params).expect("adversarial kind");
        reports.push(measure_overhead(
            &s,
            &tasks,
            cfg.seed,
            cfg.bench.rounds,
            cfg.bench.repeats,
            def.as_ref(),
        )?);
    }
    let csv = overhead_csv(&reports);
    std::fs::write(cfg.out.join("overhead.csv"), &csv)?;
    write_json(&cfg.out.join("timing.json"), &reports)?;
    print!("{csv}");
    Ok(())
}
