//! Minimal blocking JSON-over-HTTP client shared by the remote agent and the
//! remote scorer.

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HttpError {
    #[error("request to {url} timed out")]
    Timeout { url: String },
    #[error("{url} answered HTTP {status}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("request to {url} failed: {reason}")]
    Transport { url: String, reason: String },
}

/// POSTs `body` as JSON and returns the raw response body of a 2xx reply.
pub fn post_json(url: &str, body: &serde_json::Value, timeout: Duration) -> Result<String, HttpError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let classify = |e: ureq::Error| match e {
        ureq::Error::Timeout(_) => HttpError::Timeout { url: url.to_string() },
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => HttpError::Timeout { url: url.to_string() },
        other => HttpError::Transport {
            url: url.to_string(),
            reason: other.to_string(),
        },
    };
    let mut resp = agent
        .post(url)
        .header("content-type", "application/json")
        .send(body.to_string())
        .map_err(classify)?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(classify)?;
    if !(200..300).contains(&status) {
        return Err(HttpError::Status {
            url: url.to_string(),
            status,
            body: text,
        });
    }
    Ok(text)
}

/// Joins a base endpoint and a path without doubling the slash.
pub fn join(endpoint: &str, path: &str) -> String {
    format!("{}/{}", endpoint.trim_end_matches('/'), path.trim_start_matches('/'))
}
