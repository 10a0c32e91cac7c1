//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the
//! process exits nonzero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentinel_core::dataset::jsonl::{read_jsonl, write_jsonl};
use sentinel_core::dataset::{
    annotate, build_dataset, normalize_answer, split, Context, ContrastiveTuple, LabeledRecord, ResponseRecord,
    TupleConfig,
};
use sentinel_core::debate::AgentId;
use sentinel_core::defense::{select_bottom_k, Defense, RoundScores};
use sentinel_core::eval::grid::{run_grid, DefenseSetting, GridSpec};
use sentinel_core::eval::{accuracy_curve, measure_overhead, overhead_csv, pooled_detection, AnswerView};
use sentinel_core::features::FeatureVector;
use sentinel_core::policy::{AdversarialParams, BenignParams, PolicyKind, PolicySpec};
use sentinel_core::scenario::ScenarioConfig;
use sentinel_core::scorer::{
    calibrate_bias, grad_total_loss, loss_pair, total_loss, CreditScorer, LinearScorer, RoundInput, ScoreError,
    ScorerParams, TrainingConfig, TrainingHistory,
};
use sentinel_core::tasks::{generate_tasks, TaskDomain};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Eight agents, sentinel 0, adversaries 5 to 7, k = 2, persuasive attack.
/// Benign agents always start correct and are never outweighed.
fn detection_scenario() -> ScenarioConfig {
    let mut s = ScenarioConfig::standard();
    s.benign = BenignParams {
        correct_prior: 1.0,
        susceptibility: 0.5,
        noise: 0.0,
    };
    s.adversary = PolicySpec::Persuasive(AdversarialParams {
        persuasion_strength: 0.5,
        ..Default::default()
    });
    s.defense.elimination_threshold = Some(0.5);
    s
}

fn one_task(seed: u64) -> sentinel_core::debate::Task {
    generate_tasks(TaskDomain::Mcq, 1, seed).remove(0)
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let s = detection_scenario();
    let d = s.build_defense()?;
    let adversaries: BTreeSet<AgentId> = s.adversary_ids.clone();
    let mut outcomes = Vec::new();
    for seed in 0..100 {
        let o = s.run(&one_task(seed), seed, 0, Some(&d)).map_err(|e| e.to_string())?;
        check(
            o.blacklist_after(AgentId(0), 2).is_superset(&adversaries),
            format!("seed {seed}: adversaries not all blacklisted by round 2"),
        )?;
        outcomes.push(o);
    }
    let det = pooled_detection(&outcomes).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        det.accuracy == 1.0 && det.fpr == 0.0 && det.fnr == 0.0,
        format!("pooled {det:?}"),
    )?;
    check(elapsed < Duration::from_secs(10), format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "100 seeds, accuracy 1.0, FPR 0, FNR 0, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let mut s = ScenarioConfig::standard();
    s.benign = BenignParams {
        correct_prior: 0.9,
        susceptibility: 0.2,
        noise: 0.0,
    };
    s.adversary = PolicySpec::Persuasive(AdversarialParams {
        persuasion_strength: 2.0,
        ..Default::default()
    });
    s.defense.elimination_threshold = Some(0.5);
    let tasks = generate_tasks(TaskDomain::Mcq, 200, 2024);
    let d = s.build_defense()?;
    let run = |sc: &ScenarioConfig, def: Option<&Defense>| sc.run_batch(&tasks, 77, def).map_err(|e| e.to_string());
    let base = accuracy_curve(&run(&s.without_attack(), None)?, AnswerView::Global, "no_attack");
    let undefended = accuracy_curve(&run(&s, None)?, AnswerView::Global, "undefended");
    let defended = accuracy_curve(&run(&s, Some(&d))?, AnswerView::Sentinel, "defended");
    let at3 = |c: &sentinel_core::eval::AccuracyCurve| c.per_round_accuracy[2];
    let (b, u, dd) = (at3(&base), at3(&undefended), at3(&defended));
    let elapsed = start.elapsed();
    let detail = format!("round 3: baseline {b:.3}, undefended {u:.3}, defended {dd:.3}");
    check(b - u >= 0.20, format!("attack drop too small; {detail}"))?;
    check(b - dd <= 0.05, format!("defense does not recover; {detail}"))?;
    check(elapsed < Duration::from_secs(60), format!("runtime {elapsed:?}"))?;
    Ok(format!("{detail}, {:.2}s", elapsed.as_secs_f64()))
}

fn ac3() -> Outcome {
    let ln2 = std::f64::consts::LN_2;
    check((loss_pair(0.0, 0.0) - ln2).abs() <= 1e-12, "loss_pair(0)")?;
    check(
        (loss_pair(20.0, 0.0) - (-20f64).exp().ln_1p()).abs() <= 1e-12,
        "loss_pair(20)",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..1000 {
        let (c, r, f) = (
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
        );
        check(
            total_loss(c, r, f, 0.0).to_bits() == loss_pair(c, r).to_bits(),
            format!("alpha=0 mismatch at draw {i}"),
        )?;
    }
    Ok("ln 2 and log(1+e^-20) within 1e-12; alpha=0 bit-identical on 1000 draws".into())
}

fn random_tuple(rng: &mut ChaCha8Rng, i: usize) -> ContrastiveTuple {
    let mut rec = |sender: Option<usize>| ResponseRecord {
        answer: ["A", "B", "C"][rng.random_range(0..3)].to_string(),
        features: FeatureVector((0..8).map(|_| rng.random_range(-2.0..2.0)).collect()),
        sender: sender.map(AgentId),
    };
    let chosen = rec(Some(1));
    let rejected = rec(Some(2));
    let reference = rec(None);
    ContrastiveTuple {
        id: format!("t{i}"),
        trajectory_id: format!("traj{}", i / 3),
        round: (i % 5) as u32 + 1,
        context: Context::new(format!("task {i}"), format!("round 1, agent 1: claim A [x{i}]"), 4000),
        chosen,
        rejected,
        reference,
        attack_kind: "persuasive".into(),
    }
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let t = random_tuple(&mut rng, i);
        let weights: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = ScorerParams::with_weights(weights, rng.random_range(-1.0..1.0));
        let alpha = rng.random_range(0.0..2.0);
        let g = grad_total_loss(&params, &t, alpha);
        check(g.bias == 0.0, format!("tuple {i}: bias gradient {}", g.bias))?;
        let loss = |p: &ScorerParams| {
            let s = |r: &ResponseRecord| p.score(&r.features).expect("dimension 8");
            total_loss(s(&t.chosen), s(&t.rejected), s(&t.reference), alpha)
        };
        for j in 0..8 {
            let mut up = params.clone();
            let mut down = params.clone();
            up.weights[j] += h;
            down.weights[j] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            // relative error with a 1e-3 floor on the magnitude
            let rel = (g.weights[j] - fd).abs() / g.weights[j].abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
            check(
                rel <= 1e-5,
                format!("tuple {i}, weight {j}: analytic {} vs fd {fd}", g.weights[j]),
            )?;
        }
    }
    Ok(format!("100 tuples, worst relative error {worst:.2e}, bias gradient 0"))
}

/// Debates where benign agents never err, so every rejected response is
/// adversarial.
fn training_tuples() -> Result<Vec<ContrastiveTuple>, String> {
    let mut s = detection_scenario();
    s.benign.susceptibility = 0.0;
    let kinds = [
        PolicyKind::Persuasive,
        PolicyKind::Netsafe,
        PolicyKind::PromptInjection,
        PolicyKind::Psysafe,
        PolicyKind::Autoinject,
    ];
    let mut labeled = Vec::new();
    for (ki, kind) in kinds.iter().enumerate() {
        let mut sk = s.clone();
        sk.adversary = PolicySpec::adversarial(
            *kind,
            AdversarialParams {
                persuasion_strength: 0.5,
                ..Default::default()
            },
        )
        .expect("adversarial kind");
        let tasks = generate_tasks(TaskDomain::Mcq, 30, 500 + ki as u64);
        for o in sk.run_batch(&tasks, 900 + ki as u64, None).map_err(|e| e.to_string())? {
            labeled.push(annotate(o.trajectory, 4000).map_err(|e| e.to_string())?);
        }
    }
    let (tuples, _) = build_dataset(&labeled, &TupleConfig::default(), 5);
    Ok(tuples)
}

fn trained_scorer() -> Result<(ScorerParams, TrainingHistory, usize, Duration), String> {
    let start = Instant::now();
    let tuples = training_tuples()?;
    let sp = split(&tuples, (0.8, 0.2), 5).map_err(|e| e.to_string())?;
    let cfg = TrainingConfig::default();
    let (mut params, hist) = sentinel_core::scorer::train(&sp.train, &sp.heldout, &cfg).map_err(|e| e.to_string())?;
    calibrate_bias(&mut params, &sp.train);
    Ok((params, hist, tuples.len(), start.elapsed()))
}

fn ac5(trained: &Result<(ScorerParams, TrainingHistory, usize, Duration), String>) -> Outcome {
    let (_, hist, n, elapsed) = trained.as_ref().map_err(Clone::clone)?;
    check(*n >= 5000, format!("only {n} tuples"))?;
    let best = hist.heldout_accuracy.iter().copied().fold(0.0, f64::max);
    check(hist.heldout_accuracy.len() <= 20, "more than 20 epochs")?;
    check(best >= 0.95, format!("held-out ranking accuracy {best}"))?;
    for e in 2..hist.total_loss.len() {
        check(
            hist.total_loss[e] <= hist.total_loss[e - 1] + 1e-3,
            format!("loss rose at epoch {}: {:?}", e + 1, hist.total_loss),
        )?;
    }
    check(*elapsed < Duration::from_secs(30), format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "{n} tuples, held-out accuracy {:.4}, final loss {:.4}, {:.2}s",
        hist.heldout_accuracy.last().copied().unwrap_or(0.0),
        hist.total_loss.last().copied().unwrap_or(0.0),
        elapsed.as_secs_f64()
    ))
}

fn ac6(trained: &Result<(ScorerParams, TrainingHistory, usize, Duration), String>) -> Outcome {
    let (params, _, _, _) = trained.as_ref().map_err(Clone::clone)?;
    let mut s = detection_scenario();
    s.defense.elimination_threshold = Some(0.0);
    let d = Defense::with_scorer(s.defense.clone(), Arc::new(LinearScorer { params: params.clone() }));
    let mut outcomes = Vec::new();
    for seed in 0..100 {
        outcomes.push(s.run(&one_task(seed), seed, 0, Some(&d)).map_err(|e| e.to_string())?);
    }
    let det = pooled_detection(&outcomes).map_err(|e| e.to_string())?;
    let detail = format!("accuracy {:.4}, FPR {:.4}, FNR {:.4}", det.accuracy, det.fpr, det.fnr);
    check(det.accuracy >= 0.9 && det.fnr <= 0.15, detail.clone())?;
    Ok(format!("100 seeds, {detail}"))
}

fn brute_bottom_k(scores: &[(usize, f64)], k: usize) -> BTreeSet<AgentId> {
    let mut v = scores.to_vec();
    // lexicographic on (score, id) via integer encoding of {0, 0.5, 1}
    v.sort_by_key(|&(id, s)| ((s * 2.0) as i64, id));
    v.into_iter().take(k).map(|(id, _)| AgentId(id)).collect()
}

fn ac7() -> Outcome {
    // exhaustive bottom-k over score multisets from {0, 0.5, 1}
    let values = [0.0, 0.5, 1.0];
    let mut cases = 0usize;
    for len in 0..=6u32 {
        for code in 0..3usize.pow(len) {
            let mut c = code;
            let scores: Vec<(usize, f64)> = (0..len as usize)
                .map(|i| {
                    let v = values[c % 3];
                    c /= 3;
                    (i + 1, v)
                })
                .collect();
            let rs = RoundScores::new(scores.iter().map(|&(a, s)| (AgentId(a), s)).collect());
            for k in 0..=7 {
                cases += 1;
                check(
                    select_bottom_k(&rs, k) == brute_bottom_k(&scores, k),
                    format!("bottom-k mismatch on {scores:?}, k={k}"),
                )?;
            }
        }
    }

    // random debates: monotonicity, permanence and the growth bound
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let kinds = PolicyKind::ADVERSARIAL;
    for run in 0..1000u64 {
        let n = rng.random_range(3..=9usize);
        let mut s = ScenarioConfig::standard();
        s.n_agents = n;
        s.n_rounds = rng.random_range(1..=6);
        s.early_stop = rng.random_bool(0.5);
        s.topology = match rng.random_range(0..5) {
            0 => sentinel_core::debate::TopologySpec::FullyConnected,
            1 => sentinel_core::debate::TopologySpec::Ring,
            2 => sentinel_core::debate::TopologySpec::Star {
                hub: rng.random_range(0..n),
            },
            3 => sentinel_core::debate::TopologySpec::Chain,
            _ => sentinel_core::debate::TopologySpec::Tree,
        };
        let n_sent = rng.random_range(1..=2.min(n - 1));
        s.sentinel_ids = (0..n_sent).map(AgentId).collect();
        let n_adv = rng.random_range(0..=(n - n_sent).min(3));
        s.adversary_ids = (n - n_adv..n).map(AgentId).collect();
        s.adversary = PolicySpec::adversarial(
            kinds[rng.random_range(0..kinds.len())],
            AdversarialParams {
                persuasion_strength: rng.random_range(0.0..3.0),
                stealth: rng.random_range(0.0..1.0),
                tamper_rate: rng.random_range(0.0..1.0),
                ..Default::default()
            },
        )
        .expect("adversarial kind");
        s.benign = BenignParams {
            correct_prior: rng.random_range(0.0..=1.0),
            susceptibility: rng.random_range(0.0..=1.0),
            noise: rng.random_range(0.0..0.2),
        };
        s.defense.k = rng.random_range(0..n - 1);
        s.defense.score_blacklisted = rng.random_bool(0.3);
        s.defense.elimination_threshold = if rng.random_bool(0.3) { Some(0.5) } else { None };
        s.scorer = sentinel_core::scorer::ScorerSpec::Oracle;
        let d = if rng.random_bool(0.5) {
            s.build_defense()?
        } else {
            let w: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            Defense::with_scorer(
                s.defense.clone(),
                Arc::new(LinearScorer {
                    params: ScorerParams::with_weights(w, 0.0),
                }),
            )
        };
        let task = one_task(run);
        let o = s.run(&task, run, 0, Some(&d)).map_err(|e| format!("run {run}: {e}"))?;
        let k = s.defense.k;
        for &sid in &s.sentinel_ids {
            let mut prev: BTreeSet<AgentId> = BTreeSet::new();
            for t in 1..=o.rounds_executed() {
                let now = o.blacklist_after(sid, t);
                check(
                    prev.is_subset(&now),
                    format!("run {run}: blacklist shrank at round {t}"),
                )?;
                check(!now.contains(&sid), format!("run {run}: sentinel blacklisted itself"))?;
                check(
                    now.len() <= (t as usize * k).min(n - 1),
                    format!("run {run}: |B| = {} exceeds bound at round {t}", now.len()),
                )?;
                if let Some(input) = o.sentinel_inputs.iter().find(|i| i.sentinel == sid && i.round == t + 1) {
                    check(
                        input.senders.is_disjoint(&now),
                        format!("run {run}: blacklisted sender visible in round {}", t + 1),
                    )?;
                }
                prev = now;
            }
        }
    }
    Ok(format!(
        "{cases} bottom-k cases match brute force; 1000 random debates hold all invariants"
    ))
}

/// Independent decimal rendering of p/q via machine integers.
fn fraction_oracle(p: i64, q: i64) -> String {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let g = gcd(p, q);
    let (mut p, mut q) = (p / g, q / g);
    if q < 0 {
        p = -p;
        q = -q;
    }
    let mut rest = q;
    for f in [2, 5] {
        while rest % f == 0 {
            rest /= f;
        }
    }
    if rest != 1 {
        return format!("{p}/{q}");
    }
    let neg = p < 0;
    let a = p.abs();
    let mut out = format!("{}{}", if neg { "-" } else { "" }, a / q);
    let mut r = a % q;
    if r != 0 {
        out.push('.');
        while r != 0 {
            r *= 10;
            out.push(char::from(b'0' + (r / q) as u8));
            r %= q;
        }
    }
    out
}

fn ac8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = detection_scenario();
    let d = s.build_defense()?;
    let tasks = generate_tasks(TaskDomain::Math, 10, 8);
    let write_run = |name: &str| -> Result<Vec<u8>, String> {
        let outs = s.run_batch(&tasks, 8, Some(&d)).map_err(|e| e.to_string())?;
        let recs: Vec<LabeledRecord> = outs
            .into_iter()
            .map(|o| annotate(o.trajectory, 4000).map(|l| LabeledRecord::from(&l)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let p = dir.path().join(name);
        write_jsonl(&p, &recs).map_err(|e| e.to_string())?;
        std::fs::read(&p).map_err(|e| e.to_string())
    };
    check(
        write_run("a.jsonl")? == write_run("b.jsonl")?,
        "trajectory JSONL differs",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tuples: Vec<ContrastiveTuple> = (0..1000).map(|i| random_tuple(&mut rng, i)).collect();
    let cfg = TrainingConfig {
        epochs: 3,
        ..Default::default()
    };
    let h = |t: &[ContrastiveTuple]| {
        sentinel_core::scorer::train(t, &[], &cfg).map(|(p, h)| serde_json::to_string(&(p, h)).expect("serializes"))
    };
    check(
        h(&tuples).map_err(|e| e.to_string())? == h(&tuples).map_err(|e| e.to_string())?,
        "training history differs",
    )?;

    let p = dir.path().join("tuples.jsonl");
    write_jsonl(&p, &tuples).map_err(|e| e.to_string())?;
    let back: Vec<ContrastiveTuple> = read_jsonl(&p).map_err(|e| e.to_string())?;
    check(back == tuples, "tuple JSONL round trip changed records")?;

    let mut scenario = detection_scenario();
    scenario.n_rounds = 3;
    let grid = GridSpec {
        scenario,
        attacks: vec!["persuasive".into(), "aitm".into()],
        defenses: vec![
            DefenseSetting {
                label: "off".into(),
                scorer: None,
            },
            DefenseSetting {
                label: "oracle".into(),
                scorer: Some(sentinel_core::scorer::ScorerSpec::Oracle),
            },
        ],
        seeds: vec![1, 2],
        datasets: vec![TaskDomain::Mcq, TaskDomain::Math],
        n_tasks: 4,
        timing: false,
    };
    let (g1, g2) = (dir.path().join("g1"), dir.path().join("g2"));
    run_grid(&grid, &g1, 2).map_err(|e| e.to_string())?;
    run_grid(&grid, &g2, 1).map_err(|e| e.to_string())?;
    let csv = |d: &std::path::Path| std::fs::read(d.join("metrics.csv")).map_err(|e| e.to_string());
    check(csv(&g1)? == csv(&g2)?, "metrics CSV differs")?;

    check(normalize_answer("12/4").as_deref() == Ok("3"), "12/4 is not 3")?;
    for i in 0..500 {
        let p = rng.random_range(-60i64..=60);
        let q = rng.random_range(1i64..=40) * if rng.random_bool(0.2) { -1 } else { 1 };
        let raw = format!("{p}/{q}");
        let got = normalize_answer(&raw).map_err(|e| e.to_string())?;
        check(
            got == fraction_oracle(p, q),
            format!("fraction {i}: {raw} -> {got}, oracle {}", fraction_oracle(p, q)),
        )?;
    }
    Ok("JSONL, history and CSV byte-identical; 1000-tuple round trip; 500 fractions match".into())
}

/// Scorer that sleeps once per sentinel round.
struct SleepScorer(Duration);

impl CreditScorer for SleepScorer {
    fn score_round(&self, input: &RoundInput<'_>) -> Result<Vec<f64>, ScoreError> {
        std::thread::sleep(self.0);
        Ok(vec![0.0; input.candidates.len()])
    }

    fn name(&self) -> &'static str {
        "sleep"
    }
}

fn ac9() -> Outcome {
    let mut s = detection_scenario();
    s.defense.elimination_threshold = None;
    s.early_stop = false;
    s.defense.k = 1;
    let d = Defense::with_scorer(s.defense.clone(), Arc::new(SleepScorer(Duration::from_millis(50))));
    let tasks = vec![one_task(9)];
    let r = measure_overhead(&s, &tasks, 9, 5, 1, Some(&d)).map_err(|e| e.to_string())?;
    check(
        (r.detection_time - 0.25).abs() <= 0.05,
        format!("detection_time {}", r.detection_time),
    )?;
    let recomputed = 100.0 * (r.mean_round_time_with - r.mean_round_time_without) / r.mean_round_time_without;
    check(
        (r.overhead_pct - recomputed).abs() <= 1e-9,
        "overhead_pct disagrees with its columns",
    )?;
    let mut reports = Vec::new();
    for kind in PolicyKind::ADVERSARIAL {
        let mut sk = s.clone();
        sk.adversary = PolicySpec::adversarial(kind, AdversarialParams::default()).expect("adversarial kind");
        let dk = Defense::with_scorer(sk.defense.clone(), Arc::new(SleepScorer(Duration::from_millis(2))));
        reports.push(measure_overhead(&sk, &tasks, 9, 5, 1, Some(&dk)).map_err(|e| e.to_string())?);
    }
    let csv = overhead_csv(&reports);
    let lines: Vec<&str> = csv.lines().collect();
    check(
        lines[0] == "attack,without_s,with_s,detect_time_s,overhead_pct",
        "table header",
    )?;
    check(
        lines.len() == 1 + PolicyKind::ADVERSARIAL.len(),
        "one row per attack kind",
    )?;
    for (line, kind) in lines[1..].iter().zip(PolicyKind::ADVERSARIAL) {
        check(line.starts_with(&format!("{},", kind.as_str())), format!("row {line}"))?;
    }
    Ok(format!(
        "detection_time {:.3}s, overhead {:.1}%, {} table rows",
        r.detection_time,
        r.overhead_pct,
        reports.len()
    ))
}

fn main() {
    let trained = catch_unwind(trained_scorer).unwrap_or_else(|_| Err("training panicked".into()));
    let criteria: Vec<Criterion> = vec![
        ("AC1 oracle detection", Box::new(ac1)),
        ("AC2 recovery curve", Box::new(ac2)),
        ("AC3 loss exactness", Box::new(ac3)),
        ("AC4 gradient check", Box::new(ac4)),
        ("AC5 trained separability", Box::new(|| ac5(&trained))),
        ("AC6 trained defense", Box::new(|| ac6(&trained))),
        ("AC7 defense mechanics", Box::new(ac7)),
        ("AC8 determinism and round trips", Box::new(ac8)),
        ("AC9 timing harness", Box::new(ac9)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match r {
            Ok(detail) => println!("{name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("{name}: FAIL ({why})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
