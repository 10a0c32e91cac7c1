//! Deterministic rendering of dialogue into a character-bounded summary.

use std::sync::LazyLock;

use regex::Regex;

use crate::debate::{AgentId, Message};

pub fn render_line(m: &Message) -> String {
    let tag: String = m
        .rationale_digest
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    let claim = m.answer_claim.replace(['\n', '\r'], " ");
    format!("round {}, agent {}: claim {} [{}]", m.round, m.sender, claim, tag)
}

pub fn elision_header(n: usize) -> String {
    format!("[{n} earlier messages elided]")
}

fn len(s: &str) -> usize {
    s.chars().count()
}

/// One line per message in input order. When the full rendering exceeds
/// `budget` characters, the oldest lines are dropped and an elision header
/// counting them is prepended.
pub fn summarize<'a, I>(messages: I, budget: usize) -> String
where
    I: IntoIterator<Item = &'a Message>,
{
    let lines: Vec<String> = messages.into_iter().map(render_line).collect();
    if lines.is_empty() {
        return String::new();
    }
    let total = |ls: &[String]| ls.iter().map(|l| len(l)).sum::<usize>() + ls.len().saturating_sub(1);
    if total(&lines) <= budget {
        return lines.join("\n");
    }
    // kept[j..] with a header; content length grows as j decreases
    let n = lines.len();
    let mut best: Option<usize> = None;
    let mut tail = 0usize;
    for j in (1..n).rev() {
        let header = len(&elision_header(j));
        tail += len(&lines[j]) + 1;
        if header + tail <= budget {
            best = Some(j);
        } else {
            break;
        }
    }
    match best {
        Some(j) => {
            let mut out = elision_header(j);
            for l in &lines[j..] {
                out.push('\n');
                out.push_str(l);
            }
            out
        }
        None => {
            let header = elision_header(n);
            if len(&header) <= budget {
                header
            } else {
                String::new()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryLine {
    pub round: u32,
    pub agent: AgentId,
    pub claim: String,
    pub tag: String,
}

static LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^round (\d+), agent (\d+): claim (.*) \[(.*)\]$").expect("valid pattern"));

/// Recovers the message lines of a summary; headers and foreign lines are
/// skipped.
pub fn parse_summary(summary: &str) -> Vec<SummaryLine> {
    summary
        .lines()
        .filter_map(|l| {
            let c = LINE.captures(l)?;
            Some(SummaryLine {
                round: c[1].parse().ok()?,
                agent: AgentId(c[2].parse().ok()?),
                claim: c[3].to_string(),
                tag: c[4].to_string(),
            })
        })
        .collect()
}
