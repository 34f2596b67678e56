//! Structured-output extraction from model responses.

use crate::action::{normalize_action, parse_action, Action};
use regex::Regex;
use std::sync::LazyLock;

static THINKING_FENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)```thinking.*?(```|\z)").expect("static regex"));
static THINK_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<think>.*?(</think>|\z)").expect("static regex"));

/// Removes chain-of-thought blocks before structured parsing: fenced
/// ```thinking blocks and `<think>` tags, including unterminated ones.
pub fn strip_thinking(response: &str) -> String {
    let pass1 = THINKING_FENCE.replace_all(response, "");
    THINK_TAG.replace_all(&pass1, "").into_owned()
}

/// Extracts the first parseable action from a response, together with the
/// nearest `reason:` line. Lines may carry an `action:` prefix or be bare
/// commands.
pub fn extract_action(response: &str) -> Option<(Action, String)> {
    let cleaned = strip_thinking(response);
    let mut last_reason: Option<String> = None;
    let mut parsed: Option<(Action, Option<String>)> = None;
    for line in cleaned.lines() {
        let line = line.trim();
        if let Some(reason) = line.strip_prefix("reason:") {
            if parsed.is_none() {
                last_reason = Some(reason.trim().to_string());
            } else if let Some((_, slot @ None)) = &mut parsed {
                // reason listed after the action line
                *slot = Some(reason.trim().to_string());
                break;
            }
            continue;
        }
        if parsed.is_some() {
            continue;
        }
        let candidate = line.strip_prefix("action:").unwrap_or(line).trim();
        if let Ok(action) = parse_action(candidate) {
            parsed = Some((action, last_reason.take()));
        }
    }
    parsed.map(|(action, reason)| (action, reason.unwrap_or_default()))
}

/// Extracts up to `k` ranked candidates, deduplicated under
/// [`normalize_action`] with the listed order preserved.
pub fn extract_candidates(response: &str, k: usize) -> Vec<(Action, String)> {
    let cleaned = strip_thinking(response);
    let mut out: Vec<(Action, String)> = Vec::new();
    let mut seen: Vec<Action> = Vec::new();
    let mut last_reason = String::new();
    for line in cleaned.lines() {
        let line = line.trim();
        if let Some(reason) = line.strip_prefix("reason:") {
            last_reason = reason.trim().to_string();
            continue;
        }
        let candidate = line.strip_prefix("action:").unwrap_or(line).trim();
        if candidate.is_empty() || candidate.starts_with("candidate") {
            continue;
        }
        if let Ok(action) = parse_action(candidate) {
            let normalized = normalize_action(&action);
            if !seen.contains(&normalized) {
                seen.push(normalized);
                out.push((action, std::mem::take(&mut last_reason)));
                if out.len() == k {
                    break;
                }
            }
        }
    }
    out
}

/// Returns the vocabulary tags that appear verbatim in the response,
/// case-sensitively, ordered by first occurrence. Each tag is reported once.
pub fn extract_tags(response: &str, vocabulary: &[&str]) -> Vec<String> {
    let mut hits: Vec<(usize, &str)> = vocabulary
        .iter()
        .filter_map(|tag| response.find(*tag).map(|pos| (pos, *tag)))
        .collect();
    hits.sort_by_key(|(pos, _)| *pos);
    hits.into_iter().map(|(_, tag)| tag.to_string()).collect()
}

/// Parses a PASS/FAIL verdict; the last occurrence wins and anything
/// unparseable counts as FAIL.
pub fn extract_pass_fail(response: &str) -> bool {
    let cleaned = strip_thinking(response);
    let pass = cleaned.rfind("PASS");
    let fail = cleaned.rfind("FAIL");
    match (pass, fail) {
        (Some(p), Some(f)) => p > f,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Parses `instruction:` and `summary:` lines from an annotator response.
pub fn extract_instruction_summary(response: &str) -> Option<(String, String)> {
    let cleaned = strip_thinking(response);
    let mut instruction = None;
    let mut summary = None;
    for line in cleaned.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("instruction:") {
            instruction.get_or_insert_with(|| rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("summary:") {
            summary.get_or_insert_with(|| rest.trim().to_string());
        }
    }
    match (instruction, summary) {
        (Some(i), Some(s)) if !i.is_empty() => Some((i, s)),
        _ => None,
    }
}
