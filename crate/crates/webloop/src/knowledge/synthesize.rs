//! Entry synthesis: split a trajectory into sub-trajectories, generate an
//! instruction and summary for each, and keep only the triples a judge panel
//! approves.

use super::{EntrySource, KnowledgeError, KnowledgeStore};
use crate::gateway::{parse, Backend};
use crate::trajectory::{split_subsequences, Trajectory};
use std::fmt::Write as _;

const ANNOTATOR_SYSTEM: &str = "You label sub-trajectories of web-navigation episodes for a knowledge base.";

fn annotator_prompt(sub: &Trajectory) -> String {
    format!(
        "Write the task instruction this sub-trajectory accomplishes and a one-sentence summary of what happens in it.\nReply with exactly two lines:\ninstruction: <the task instruction>\nsummary: <the summary>\n\nsub-trajectory:\n{}",
        sub.render_text()
    )
}

const JUDGE_SYSTEM: &str = "You review candidate knowledge-base entries for a web-navigation agent.";

/// The fixed criteria checklist every judge receives.
pub const VALIDATION_CRITERIA: &str = "Criteria:\n1. the instruction matches the actions actually taken;\n2. the summary is faithful to the trajectory;\n3. the trajectory is coherent and executable.";

fn judge_prompt(sub: &Trajectory, instruction: &str, summary: &str) -> String {
    let mut out = String::new();
    out.push_str("Decide whether this candidate entry satisfies ALL criteria.\n");
    out.push_str(VALIDATION_CRITERIA);
    out.push_str("\n\n");
    let _ = writeln!(out, "instruction: {instruction}");
    let _ = writeln!(out, "summary: {summary}");
    let _ = writeln!(out, "trajectory:\n{}", sub.render_text());
    out.push_str("\nAnswer PASS or FAIL with a brief rationale.");
    out
}

/// Majority vote over the judge panel on one (trajectory, instruction,
/// summary) triple. Judges that fail at the transport level or answer
/// unparseably count as FAIL votes; ties resolve to FAIL.
pub fn debate_validate(
    sub: &Trajectory,
    instruction: &str,
    summary: &str,
    judges: &[Backend],
) -> Result<bool, KnowledgeError> {
    if judges.is_empty() {
        return Err(KnowledgeError::NoJudges);
    }
    let user = judge_prompt(sub, instruction, summary);
    let mut passes = 0usize;
    for judge in judges {
        let vote = match judge.complete(JUDGE_SYSTEM, &user) {
            Ok(response) => parse::extract_pass_fail(&response),
            Err(err) => {
                log::debug!("judge `{}` errored, counting FAIL: {err}", judge.name());
                false
            }
        };
        if vote {
            passes += 1;
        }
    }
    Ok(passes * 2 > judges.len())
}

/// What happened to each sub-trajectory of one synthesis batch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynthesisReport {
    /// Ids of the entries added to the store.
    pub added: Vec<u64>,
    /// Sub-trajectories rejected by the judge panel.
    pub rejected: u32,
    /// Sub-trajectories skipped because annotation failed or was unparseable.
    pub failed: u32,
    /// Sub-trajectories already present under the same content hash.
    pub duplicates: u32,
}

/// Splits `trajectory` into observation-bounded sub-trajectories, asks the
/// annotator for an instruction and summary for each, validates each triple
/// with the judge panel, and ingests the passing ones as validated entries.
/// Failures on individual sub-trajectories are logged and skipped; the batch
/// itself succeeds.
pub fn synthesize_entries(
    store: &mut KnowledgeStore,
    trajectory: &Trajectory,
    annotator: &Backend,
    judges: &[Backend],
    source: EntrySource,
    iteration: u32,
) -> Result<SynthesisReport, KnowledgeError> {
    if judges.is_empty() {
        return Err(KnowledgeError::NoJudges);
    }
    let subs = split_subsequences(trajectory)?;
    let mut report = SynthesisReport::default();
    for sub in subs {
        let response = match annotator.complete(ANNOTATOR_SYSTEM, &annotator_prompt(&sub)) {
            Ok(response) => response,
            Err(err) => {
                log::debug!("annotator failed on a sub-trajectory, skipping: {err}");
                report.failed += 1;
                continue;
            }
        };
        let Some((instruction, summary)) = parse::extract_instruction_summary(&response) else {
            log::debug!("annotator response had no instruction/summary lines, skipping");
            report.failed += 1;
            continue;
        };
        if !debate_validate(&sub, &instruction, &summary, judges)? {
            report.rejected += 1;
            continue;
        }
        match store.ingest(sub, instruction, summary, true, source, iteration) {
            Some(entry) => report.added.push(entry.id),
            None => report.duplicates += 1,
        }
    }
    Ok(report)
}
