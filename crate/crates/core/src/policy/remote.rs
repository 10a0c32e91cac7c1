//! Agents whose answers come from an external HTTP service.

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::StepView;
use crate::dataset::normalize::normalize_answer;
use crate::debate::{AgentId, Message};
use crate::features::{idx, FeatureModel, FeatureVector};
use crate::http::{join, post_json, HttpError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteAgentConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    super::default_timeout().as_millis() as u64
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RemoteAgentError {
    #[error("agent service unreachable: {0}")]
    Network(#[from] HttpError),
    #[error("agent service sent a malformed reply: {raw}")]
    Malformed { raw: String },
    #[error("answer {answer:?} matches no option; reply was {raw}")]
    UnparseableAnswer { answer: String, raw: String },
}

#[derive(Deserialize)]
struct Reply {
    answer_claim: String,
    #[serde(default)]
    text: String,
}

/// Maps a free-form answer onto one of `options`: exact match first, then a
/// match after normalisation.
pub fn match_option(answer: &str, options: &[String]) -> Option<String> {
    if let Some(o) = options.iter().find(|o| *o == answer) {
        return Some(o.clone());
    }
    let want = normalize_answer(answer).ok()?;
    options
        .iter()
        .find(|o| normalize_answer(o).ok().as_deref() == Some(want.as_str()))
        .cloned()
}

/// Feature vector derived from surface statistics of a response text.
pub fn text_features(text: &str, model: &FeatureModel) -> FeatureVector {
    let mut f = model.benign_mean();
    let words: Vec<String> = text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        return f;
    }
    let unique: BTreeSet<&str> = words.iter().map(String::as_str).collect();
    f.set(idx::VERBOSITY, (words.len() as f64 / 100.0).min(1.0));
    f.set(idx::NOVELTY, unique.len() as f64 / words.len() as f64);
    let authority = words
        .iter()
        .filter(|w| {
            matches!(
                w.as_str(),
                "clearly" | "certainly" | "expert" | "proven" | "definitely" | "obviously"
            )
        })
        .count();
    f.set(
        idx::AUTHORITY,
        model.benign_mean.get(idx::AUTHORITY).copied().unwrap_or(0.0) + authority as f64 / words.len() as f64 * 10.0,
    );
    f
}

/// One round for a remote agent: POST `{endpoint}/agent/step`.
pub fn remote_agent_step(
    cfg: &RemoteAgentConfig,
    me: AgentId,
    view: &StepView<'_>,
    model: &FeatureModel,
) -> Result<Message, RemoteAgentError> {
    let visible: Vec<_> = view
        .visible
        .iter()
        .map(|m| {
            json!({
                "sender": m.sender,
                "round": m.round,
                "answer_claim": m.answer_claim,
                "text": m.rationale_digest,
            })
        })
        .collect();
    let body = json!({
        "task": view.task.describe(),
        "options": view.task.options,
        "visible_messages": visible,
    });
    let raw = post_json(
        &join(&cfg.endpoint, "agent/step"),
        &body,
        Duration::from_millis(cfg.timeout_ms),
    )?;
    let reply: Reply = serde_json::from_str(&raw).map_err(|_| RemoteAgentError::Malformed { raw: raw.clone() })?;
    let claim =
        match_option(&reply.answer_claim, &view.task.options).ok_or_else(|| RemoteAgentError::UnparseableAnswer {
            answer: reply.answer_claim.clone(),
            raw: raw.clone(),
        })?;
    Ok(Message {
        sender: me,
        round: view.round,
        answer_claim: claim,
        features: text_features(&reply.text, model),
        rationale_digest: reply.text.chars().take(200).collect(),
    })
}
