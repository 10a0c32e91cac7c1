//! Client for an external scoring service.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::{CreditScorer, RoundInput, ScoreError};
use crate::http::{join, post_json, HttpError};

/// What a sentinel does when the service fails.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Abort the round with the error.
    #[default]
    Fail,
    /// Substitute a score of 0.
    Neutral,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RemoteScoreError {
    #[error("scoring request to {url} timed out")]
    Timeout { url: String },
    #[error("scoring service returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("scoring service unreachable: {reason}")]
    Network { reason: String },
    #[error("scoring service sent a malformed reply: {raw}")]
    Malformed { raw: String },
    #[error("scoring service sent a non-finite score: {raw}")]
    NonFinite { raw: String },
}

impl From<HttpError> for RemoteScoreError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Timeout { url } => RemoteScoreError::Timeout { url },
            HttpError::Status { status, body, .. } => RemoteScoreError::Status { status, body },
            HttpError::Transport { reason, .. } => RemoteScoreError::Network { reason },
        }
    }
}

pub(crate) fn default_timeout_ms() -> u64 {
    5_000
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteScorer {
    pub endpoint: String,
    pub timeout: Duration,
    pub fallback: Fallback,
}

impl RemoteScorer {
    pub fn new(endpoint: impl Into<String>, timeout_ms: u64, fallback: Fallback) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_millis(timeout_ms),
            fallback,
        }
    }

    /// Parses a `{"score": number}` reply.
    pub fn parse_reply(raw: &str) -> Result<f64, RemoteScoreError> {
        let v: serde_json::Value =
            serde_json::from_str(raw).map_err(|_| RemoteScoreError::Malformed { raw: raw.to_string() })?;
        match v.get("score") {
            Some(serde_json::Value::Number(n)) => {
                let s = n
                    .as_f64()
                    .ok_or_else(|| RemoteScoreError::NonFinite { raw: raw.to_string() })?;
                if s.is_finite() {
                    Ok(s)
                } else {
                    Err(RemoteScoreError::NonFinite { raw: raw.to_string() })
                }
            }
            // JSON numbers cannot encode NaN or infinities; accept the usual spellings as such
            Some(serde_json::Value::String(s))
                if matches!(
                    s.to_ascii_lowercase().as_str(),
                    "nan" | "inf" | "-inf" | "infinity" | "-infinity"
                ) =>
            {
                Err(RemoteScoreError::NonFinite { raw: raw.to_string() })
            }
            _ => Err(RemoteScoreError::Malformed { raw: raw.to_string() }),
        }
    }

    pub fn score_one(&self, task: &str, summary: &str, answer: &str, text: &str) -> Result<f64, RemoteScoreError> {
        let body = json!({
            "context": { "task": task, "summary": summary },
            "response": { "answer": answer, "text": text },
        });
        let raw = post_json(&join(&self.endpoint, "score"), &body, self.timeout)?;
        Self::parse_reply(&raw)
    }
}

impl CreditScorer for RemoteScorer {
    fn score_round(&self, input: &RoundInput<'_>) -> Result<Vec<f64>, ScoreError> {
        input
            .candidates
            .iter()
            .map(|m| {
                match self.score_one(
                    &input.context.task_description,
                    &input.context.dialogue_summary,
                    &m.answer_claim,
                    &m.rationale_digest,
                ) {
                    Ok(s) => Ok(s),
                    Err(e) if self.fallback == Fallback::Neutral => {
                        tracing::warn!(agent = %m.sender, error = %e, "remote scorer failed; using neutral score");
                        Ok(0.0)
                    }
                    Err(e) => Err(e.into()),
                }
            })
            .collect()
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_parsing() {
        assert_eq!(RemoteScorer::parse_reply(r#"{"score": 0.25}"#), Ok(0.25));
        assert!(matches!(
            RemoteScorer::parse_reply("{"),
            Err(RemoteScoreError::Malformed { .. })
        ));
        assert!(matches!(
            RemoteScorer::parse_reply(r#"{"s":1}"#),
            Err(RemoteScoreError::Malformed { .. })
        ));
        assert!(matches!(
            RemoteScorer::parse_reply(r#"{"score":"NaN"}"#),
            Err(RemoteScoreError::NonFinite { .. })
        ));
    }
}
