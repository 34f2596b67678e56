//! Multi-task training-data export.
//!
//! Each trajectory step carrying both an action and a reason yields two
//! records: an action task (output = the action's DSL text) and a reasoning
//! task (output = the rationale). Steps without a reason yield only the
//! action record and are counted in the skew report.

use crate::action::render_action;
use crate::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const ACTION_TASK_DIRECTIVE: &str =
    "Predict the next action to take on the current web page to accomplish the objective. Reply with one action command.";
pub const REASONING_TASK_DIRECTIVE: &str =
    "Explain why the next action taken on the current web page is appropriate for the objective.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Action,
    Reasoning,
}

/// One instruction/input/output training example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillationRecord {
    pub task_kind: TaskKind,
    pub instruction: String,
    /// Rendered observation plus the task objective.
    pub input: String,
    pub output: String,
}

/// Counts of steps that could not produce a full record pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSkew {
    /// Action steps lacking a reason; they emit only the action record.
    pub steps_missing_reason: u32,
}

#[derive(Debug, Clone, Default)]
pub struct MultitaskExport {
    pub records: Vec<DistillationRecord>,
    pub skew: ExportSkew,
}

/// Builds the record input from the observation the action was taken on and
/// the episode objective. The trailing `objective:` line is the parse
/// anchor for consumers that need the parts back.
pub fn record_input(observation_content: &str, objective: &str) -> String {
    format!("observation:\n{observation_content}\n\nobjective: {objective}")
}

/// Splits a record input back into (observation content, objective).
pub fn split_record_input(input: &str) -> Option<(&str, &str)> {
    let marker = "\n\nobjective: ";
    let pos = input.rfind(marker)?;
    let observation = input.strip_prefix("observation:\n")?[..pos - "observation:\n".len()].trim_end();
    Some((observation, input[pos + marker.len()..].trim()))
}

/// Exports action and reasoning records from judged trajectories. Inputs are
/// built from the observation preceding each action.
pub fn export_multitask(trajectories: &[Trajectory]) -> MultitaskExport {
    let mut export = MultitaskExport::default();
    for trajectory in trajectories {
        let mut last_observation: Option<&str> = None;
        for step in trajectory.steps() {
            if let Some(obs) = &step.observation {
                last_observation = Some(&obs.content);
            }
            let Some(action) = &step.action else { continue };
            let Some(observation) = last_observation else { continue };
            let input = record_input(observation, &trajectory.objective);
            export.records.push(DistillationRecord {
                task_kind: TaskKind::Action,
                instruction: ACTION_TASK_DIRECTIVE.to_string(),
                input: input.clone(),
                output: render_action(action),
            });
            match &step.reason {
                Some(reason) => export.records.push(DistillationRecord {
                    task_kind: TaskKind::Reasoning,
                    instruction: REASONING_TASK_DIRECTIVE.to_string(),
                    input,
                    output: reason.clone(),
                }),
                None => export.skew.steps_missing_reason += 1,
            }
        }
    }
    export
}

/// Companion manifest tying a dataset to its source trajectories.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExportManifest {
    pub entries: Vec<ManifestEntry>,
    pub record_count: usize,
    pub skew: ExportSkew,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub content_hash: String,
    pub type_tag: String,
    pub objective: String,
    pub judge_pass: bool,
}

pub fn write_records(path: &Path, records: &[DistillationRecord]) -> std::io::Result<()> {
    let mut file = fs::File::create(path)?;
    for record in records {
        writeln!(
            file,
            "{}",
            serde_json::to_string(record).expect("record serialization cannot fail")
        )?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> std::io::Result<Vec<DistillationRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DistillationRecord = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        out.push(record);
    }
    Ok(out)
}
