//! Remote scorer and remote agent against an in-process HTTP stub.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use sentinel_core::debate::{AgentId, DebateError};
use sentinel_core::defense::Defense;
use sentinel_core::policy::{AdversarialParams, BenignParams, PolicySpec, RemoteAgentConfig};
use sentinel_core::scenario::ScenarioConfig;
use sentinel_core::scorer::{Fallback, RemoteScoreError, RemoteScorer, ScorerSpec};
use sentinel_core::tasks::{generate_tasks, TaskDomain};
use serde_json::Value;

type Handler = dyn Fn(&str, &Value) -> (u16, String) + Send + Sync;

/// Serves `handler` on an ephemeral port, one request per connection.
fn serve(handler: Arc<Handler>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = handler.clone();
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let mut len = 0usize;
                loop {
                    let mut h = String::new();
                    if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let json: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let (status, reply) = handler(&path, &json);
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            });
        }
    });
    format!("http://{addr}")
}

fn scenario() -> ScenarioConfig {
    let mut s = ScenarioConfig::standard();
    s.benign = BenignParams {
        correct_prior: 1.0,
        susceptibility: 0.0,
        noise: 0.0,
    };
    s.adversary = PolicySpec::Persuasive(AdversarialParams {
        persuasion_strength: 0.5,
        ..Default::default()
    });
    s.defense.elimination_threshold = Some(0.5);
    s
}

#[test]
fn remote_scorer_drives_the_defense() {
    let task = generate_tasks(TaskDomain::Mcq, 1, 1).remove(0);
    let truth = task.ground_truth.clone();
    let url = serve(Arc::new(move |path, body| {
        assert_eq!(path, "/score");
        let ok = body["response"]["answer"] == Value::String(truth.clone());
        (200, format!("{{\"score\": {}}}", if ok { 1.0 } else { 0.0 }))
    }));
    let s = scenario();
    let d = Defense::new(
        s.defense.clone(),
        &ScorerSpec::Remote {
            endpoint: url,
            timeout_ms: 2000,
            fallback: Fallback::Fail,
        },
    )
    .unwrap();
    let o = s.run(&task, 1, 0, Some(&d)).unwrap();
    let expected: std::collections::BTreeSet<_> = [5, 6, 7].map(AgentId).into();
    assert_eq!(o.blacklist_after(AgentId(0), o.rounds_executed()), expected);
}

#[test]
fn server_errors_fail_or_fall_back() {
    let url = serve(Arc::new(|_, _| (500, "boom".into())));
    let task = generate_tasks(TaskDomain::Mcq, 1, 2).remove(0);
    let s = scenario();
    let spec = |fallback| ScorerSpec::Remote {
        endpoint: url.clone(),
        timeout_ms: 2000,
        fallback,
    };
    let strict = Defense::new(s.defense.clone(), &spec(Fallback::Fail)).unwrap();
    assert!(matches!(
        s.run(&task, 2, 0, Some(&strict)),
        Err(DebateError::Score { .. })
    ));
    let lenient = Defense::new(s.defense.clone(), &spec(Fallback::Neutral)).unwrap();
    let o = s.run(&task, 2, 0, Some(&lenient)).unwrap();
    // neutral scores sit below the 0.5 gate, so bottom-k still proceeds by id
    assert!(o.blacklist_after(AgentId(0), 1).contains(&AgentId(1)));

    let direct = RemoteScorer::new(url, 2000, Fallback::Fail);
    assert!(matches!(
        direct.score_one("t", "", "A", ""),
        Err(RemoteScoreError::Status { status: 500, .. })
    ));
}

#[test]
fn malformed_slow_and_unreachable_services() {
    let bad = serve(Arc::new(|_, _| (200, "not json".into())));
    assert!(matches!(
        RemoteScorer::new(bad, 2000, Fallback::Fail).score_one("t", "", "A", ""),
        Err(RemoteScoreError::Malformed { .. })
    ));

    let slow = serve(Arc::new(|_, _| {
        thread::sleep(Duration::from_millis(800));
        (200, "{\"score\": 1}".into())
    }));
    assert!(matches!(
        RemoteScorer::new(slow, 100, Fallback::Fail).score_one("t", "", "A", ""),
        Err(RemoteScoreError::Timeout { .. })
    ));

    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    assert!(matches!(
        RemoteScorer::new(format!("http://127.0.0.1:{port}"), 500, Fallback::Fail).score_one("t", "", "A", ""),
        Err(RemoteScoreError::Network { .. })
    ));
}

#[test]
fn remote_agent_takes_part_in_a_debate() {
    let task = generate_tasks(TaskDomain::Mcq, 1, 3).remove(0);
    let pick = task.options[0].clone();
    let reply = pick.clone();
    let url = serve(Arc::new(move |path, body| {
        assert_eq!(path, "/agent/step");
        assert!(body["visible_messages"].is_array());
        (
            200,
            format!("{{\"answer_claim\": \"{reply}\", \"text\": \"because it is\"}}"),
        )
    }));
    let mut s = scenario();
    s.overrides.insert(
        AgentId(1),
        PolicySpec::Remote(RemoteAgentConfig {
            endpoint: url,
            timeout_ms: 2000,
        }),
    );
    let o = s.run(&task, 3, 0, None).unwrap();
    for round in o.trajectory.messages.rounds() {
        let m = round.iter().find(|m| m.sender == AgentId(1)).unwrap();
        assert_eq!(m.answer_claim, pick);
        assert_eq!(m.rationale_digest, "because it is");
    }
}

#[test]
fn remote_agent_with_foreign_answer_is_an_error() {
    let url = serve(Arc::new(|_, _| {
        (200, "{\"answer_claim\": \"no such option\", \"text\": \"\"}".into())
    }));
    let task = generate_tasks(TaskDomain::Mcq, 1, 4).remove(0);
    let mut s = scenario();
    s.overrides.insert(
        AgentId(2),
        PolicySpec::Remote(RemoteAgentConfig {
            endpoint: url,
            timeout_ms: 2000,
        }),
    );
    assert!(matches!(
        s.run(&task, 4, 0, None),
        Err(DebateError::Policy { agent: AgentId(2), .. })
    ));
}
