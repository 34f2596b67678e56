//! Chain-of-thought filtering of retrieved examples.
//!
//! Candidates are presented to the filter backend labeled `external
//! knowledge0..n`; the reply's final bracketed list names the ones worth
//! keeping. An unparseable reply conservatively keeps the top-ranked
//! candidate.

use super::{KnowledgeEntry, KnowledgeError};
use crate::gateway::{prompts, strip_thinking, Backend};
use crate::trajectory::Observation;
use regex::Regex;
use std::sync::LazyLock;

static BRACKET_GROUP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\[[^\[\]]*[Ee]xternal\s+[Kk]nowledge[^\[\]]*\]").expect("static regex")
});
static KNOWLEDGE_INDEX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[Ee]xternal\s+[Kk]nowledge\s*(\d+)").expect("static regex"));

/// Indices named by the final bracketed `[External knowledge...]` group of a
/// filter response, in listed order, deduplicated.
pub(crate) fn parse_filter_indices(response: &str) -> Vec<usize> {
    let cleaned = strip_thinking(response);
    let Some(group) = BRACKET_GROUP.find_iter(&cleaned).last() else {
        return Vec::new();
    };
    let mut seen = Vec::new();
    for cap in KNOWLEDGE_INDEX.captures_iter(group.as_str()) {
        if let Ok(idx) = cap[1].parse::<usize>() {
            if !seen.contains(&idx) {
                seen.push(idx);
            }
        }
    }
    seen
}

/// Asks the filter backend which retrieved candidates are actually useful
/// for predicting the next action. Empty input returns empty output without
/// a backend call.
pub fn filter_examples(
    candidates: &[KnowledgeEntry],
    instruction: &str,
    observation: &Observation,
    filter_backend: &Backend,
) -> Result<Vec<KnowledgeEntry>, KnowledgeError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let system = "You evaluate retrieved examples for a web-navigation agent.";
    let user = prompts::filter_prompt(instruction, observation, candidates);
    let response = filter_backend.complete(system, &user)?;
    let indices: Vec<usize> = parse_filter_indices(&response)
        .into_iter()
        .filter(|i| *i < candidates.len())
        .collect();
    if indices.is_empty() {
        // Conservative fallback: keep the top-ranked candidate.
        return Ok(vec![candidates[0].clone()]);
    }
    Ok(indices.into_iter().map(|i| candidates[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Action;
    use crate::gateway::{BackendConfig, Locality, ScriptedBehavior};
    use crate::knowledge::{EntrySource, KnowledgeStore};
    use crate::trajectory::Trajectory;

    fn entries(n: usize) -> Vec<KnowledgeEntry> {
        let mut store = KnowledgeStore::new();
        for i in 0..n {
            let mut t = Trajectory::new("t", format!("objective {i}"), "sim://s");
            t.push_observation(format!("page {i}"), "sim://s/a").unwrap();
            t.push_action(Action::GoBack, None).unwrap();
            t.push_observation("tail page", "sim://s/b").unwrap();
            store.ingest(t, format!("instr {i}"), format!("sum {i}"), true, EntrySource::Teacher, 0);
        }
        store.entries().to_vec()
    }

    fn filter_backend(reply: &str) -> Backend {
        Backend::scripted(
            BackendConfig::scripted("filter", Locality::Cloud),
            ScriptedBehavior::constant(reply),
        )
        .unwrap()
    }

    fn obs() -> Observation {
        Observation {
            content: "current page".to_string(),
            url: "sim://s/a".to_string(),
            step_index: 0,
        }
    }

    #[test]
    fn final_bracket_group_wins() {
        // Analysis text mentions other entries; only the final bracketed
        // group counts.
        let response = "External Knowledge0 and External Knowledge1 describe a different task.\nOnly the last one helps.\n[External Knowledge2]";
        assert_eq!(parse_filter_indices(response), vec![2]);
        let picked = filter_examples(&entries(3), "obj", &obs(), &filter_backend(response)).unwrap();
        assert_eq!(picked.len(), 1);
        assert_eq!(picked[0].instruction, "instr 2");
    }

    #[test]
    fn multi_index_list_preserves_order() {
        let picked = filter_examples(
            &entries(3),
            "obj",
            &obs(),
            &filter_backend("[External knowledge0, External knowledge1]"),
        )
        .unwrap();
        assert_eq!(picked.len(), 2);
        assert_eq!(picked[0].instruction, "instr 0");
        assert_eq!(picked[1].instruction, "instr 1");
    }

    #[test]
    fn garbage_falls_back_to_top_candidate() {
        let picked =
            filter_examples(&entries(3), "obj", &obs(), &filter_backend("no verdict at all")).unwrap();
        assert_eq!(picked.len(), 1);
        assert_eq!(picked[0].instruction, "instr 0");
        // Out-of-range indices also fall back.
        let picked =
            filter_examples(&entries(2), "obj", &obs(), &filter_backend("[External knowledge7]")).unwrap();
        assert_eq!(picked[0].instruction, "instr 0");
    }

    #[test]
    fn empty_candidates_skip_the_backend() {
        let backend = filter_backend("unused");
        let picked = filter_examples(&[], "obj", &obs(), &backend).unwrap();
        assert!(picked.is_empty());
        assert_eq!(backend.audit().len(), 0);
    }
}
