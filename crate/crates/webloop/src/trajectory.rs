//! Episode records: observations, actions, reasons, and their file format.
//!
//! A [`Trajectory`] is an ordered list of steps where each step carries an
//! observation, an action (optionally with a reason), or both. Trajectories
//! serialize to a line-delimited JSON record format (see [`to_record_json`])
//! whose steps hold the observation text and the action's DSL string; the
//! in-memory form keeps per-observation urls and indices as well.

use crate::action::{parse_action, render_action, Action};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

/// A flattened accessibility-tree rendering of one page view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    /// Page text as the agent perceives it. Never empty.
    pub content: String,
    /// Url of the page this observation was taken from.
    pub url: String,
    /// Position of this observation among the observations of its trajectory.
    pub step_index: u32,
}

/// One step of an episode: an observation, an action with an optional reason,
/// or both. A reason never appears without an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// An episode record: objective, start url, steps, and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub type_tag: String,
    pub objective: String,
    pub url: String,
    steps: Vec<Step>,
    /// Goal-evaluation score in [0, 1], when known.
    pub success: Option<f64>,
    num_actions: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrajectoryError {
    #[error("observation content must be non-empty")]
    EmptyObservation,
    #[error("trajectories must begin with an observation-bearing step")]
    ActionBeforeObservation,
    #[error("a reason requires an action on the same step")]
    ReasonWithoutAction,
    #[error("step carries neither observation nor action")]
    EmptyStep,
    #[error("stored num actions {stored} does not match the {actual} action-bearing steps")]
    NumActionsMismatch { stored: u32, actual: u32 },
    #[error("trajectory has fewer than 2 observations")]
    Degenerate,
}

impl Trajectory {
    pub fn new(
        type_tag: impl Into<String>,
        objective: impl Into<String>,
        url: impl Into<String>,
    ) -> Self {
        Trajectory {
            type_tag: type_tag.into(),
            objective: objective.into(),
            url: url.into(),
            steps: Vec::new(),
            success: None,
            num_actions: 0,
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Count of steps carrying an action.
    pub fn num_actions(&self) -> u32 {
        self.num_actions
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.steps.iter().filter_map(|s| s.observation.as_ref())
    }

    pub fn num_observations(&self) -> usize {
        self.observations().count()
    }

    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.steps.iter().filter_map(|s| s.action.as_ref())
    }

    pub fn last_action(&self) -> Option<&Action> {
        self.actions().last()
    }

    /// Appends an observation step. The step index is assigned from the
    /// observation's position in this trajectory.
    pub fn push_observation(
        &mut self,
        content: impl Into<String>,
        url: impl Into<String>,
    ) -> Result<(), TrajectoryError> {
        let content = content.into();
        if content.is_empty() {
            return Err(TrajectoryError::EmptyObservation);
        }
        let step_index = self.num_observations() as u32;
        self.steps.push(Step {
            observation: Some(Observation {
                content,
                url: url.into(),
                step_index,
            }),
            action: None,
            reason: None,
        });
        Ok(())
    }

    /// Appends an action step, optionally with its rationale.
    pub fn push_action(
        &mut self,
        action: Action,
        reason: Option<String>,
    ) -> Result<(), TrajectoryError> {
        if self.steps.is_empty() {
            return Err(TrajectoryError::ActionBeforeObservation);
        }
        self.steps.push(Step {
            observation: None,
            action: Some(action),
            reason,
        });
        self.num_actions += 1;
        Ok(())
    }

    /// Validates the stored invariants, returning the first violation.
    pub fn check_invariants(&self) -> Result<(), TrajectoryError> {
        if let Some(first) = self.steps.first() {
            if first.observation.is_none() {
                return Err(TrajectoryError::ActionBeforeObservation);
            }
        }
        let mut next_index = 0u32;
        let mut actions = 0u32;
        for step in &self.steps {
            if step.observation.is_none() && step.action.is_none() {
                return Err(TrajectoryError::EmptyStep);
            }
            if step.reason.is_some() && step.action.is_none() {
                return Err(TrajectoryError::ReasonWithoutAction);
            }
            if let Some(obs) = &step.observation {
                if obs.content.is_empty() {
                    return Err(TrajectoryError::EmptyObservation);
                }
                if obs.step_index != next_index {
                    return Err(TrajectoryError::NumActionsMismatch {
                        stored: obs.step_index,
                        actual: next_index,
                    });
                }
                next_index += 1;
            }
            if step.action.is_some() {
                actions += 1;
            }
        }
        if actions != self.num_actions {
            return Err(TrajectoryError::NumActionsMismatch {
                stored: self.num_actions,
                actual: actions,
            });
        }
        Ok(())
    }

    /// Plain-text rendering used in prompts, embeddings, and judge calls.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "objective: {}", self.objective);
        let _ = writeln!(out, "url: {}", self.url);
        if let Some(success) = self.success {
            let _ = writeln!(out, "success: {success}");
        }
        out.push_str("steps:\n");
        out.push_str(&render_steps(&self.steps));
        out
    }
}

/// Renders only the steps, as used for the interaction-history prompt section.
pub fn render_steps(steps: &[Step]) -> String {
    let mut out = String::new();
    for step in steps {
        if let Some(obs) = &step.observation {
            let _ = writeln!(out, "observation:\n{}", obs.content);
        }
        if let Some(action) = &step.action {
            let _ = writeln!(out, "action: {}", render_action(action));
            if let Some(reason) = &step.reason {
                let _ = writeln!(out, "reason: {reason}");
            }
        }
    }
    out
}

/// Returns every contiguous subsequence of `trajectory` that begins and ends
/// at an observation-bearing step, preserving interleaved actions and
/// reasons. For `n` observations there are `n * (n - 1) / 2` outputs, ordered
/// by (start, end). Outputs inherit the objective, url, type tag, and success
/// flag; observation indices are re-zeroed and action counts recomputed.
pub fn split_subsequences(trajectory: &Trajectory) -> Result<Vec<Trajectory>, TrajectoryError> {
    let positions: Vec<usize> = trajectory
        .steps
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.observation.as_ref().map(|_| i))
        .collect();
    if positions.len() < 2 {
        return Err(TrajectoryError::Degenerate);
    }
    let mut out = Vec::with_capacity(positions.len() * (positions.len() - 1) / 2);
    for (i, &start) in positions.iter().enumerate() {
        for &end in &positions[i + 1..] {
            let mut sub = Trajectory::new(
                trajectory.type_tag.clone(),
                trajectory.objective.clone(),
                trajectory.url.clone(),
            );
            sub.success = trajectory.success;
            let mut next_index = 0u32;
            for step in &trajectory.steps[start..=end] {
                let mut step = step.clone();
                if let Some(obs) = &mut step.observation {
                    obs.step_index = next_index;
                    next_index += 1;
                }
                if step.action.is_some() {
                    sub.num_actions += 1;
                }
                sub.steps.push(step);
            }
            out.push(sub);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Record file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RecordWire {
    #[serde(rename = "type")]
    type_tag: String,
    objective: String,
    url: String,
    steps: Vec<StepWire>,
    #[serde(skip_serializing_if = "Option::is_none")]
    success: Option<f64>,
    #[serde(rename = "num actions", skip_serializing_if = "Option::is_none")]
    num_actions: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct StepWire {
    #[serde(skip_serializing_if = "Option::is_none")]
    observation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("record line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<RecordError>,
    },
    #[error("invalid record: {0}")]
    Invalid(#[from] TrajectoryError),
    #[error("bad action text: {0}")]
    Action(#[from] crate::action::ParseError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Serializes a trajectory to the record format: `type`, `objective`, `url`,
/// `steps` (objects with optional `observation`, `action`, `reason`),
/// optional `success`, and `num actions`. Actions serialize as DSL text;
/// observations as their content string.
pub fn to_record_json(trajectory: &Trajectory) -> String {
    let wire = RecordWire {
        type_tag: trajectory.type_tag.clone(),
        objective: trajectory.objective.clone(),
        url: trajectory.url.clone(),
        steps: trajectory
            .steps
            .iter()
            .map(|s| StepWire {
                observation: s.observation.as_ref().map(|o| o.content.clone()),
                action: s.action.as_ref().map(render_action),
                reason: s.reason.clone(),
            })
            .collect(),
        success: trajectory.success,
        num_actions: Some(trajectory.num_actions),
    };
    serde_json::to_string(&wire).expect("record serialization cannot fail")
}

/// Parses a record-format JSON object back into a trajectory. Observation
/// urls are not part of the record format and fall back to the trajectory
/// url; a stored `num actions` must match the actual action count.
pub fn from_record_json(text: &str) -> Result<Trajectory, RecordError> {
    let wire: RecordWire = serde_json::from_str(text)?;
    let mut trajectory = Trajectory::new(wire.type_tag, wire.objective, wire.url.clone());
    trajectory.success = wire.success;
    let mut next_index = 0u32;
    for step in wire.steps {
        let observation = match step.observation {
            Some(content) => {
                if content.is_empty() {
                    return Err(TrajectoryError::EmptyObservation.into());
                }
                let obs = Observation {
                    content,
                    url: wire.url.clone(),
                    step_index: next_index,
                };
                next_index += 1;
                Some(obs)
            }
            None => None,
        };
        let action = step.action.as_deref().map(parse_action).transpose()?;
        if observation.is_none() && action.is_none() {
            return Err(TrajectoryError::EmptyStep.into());
        }
        if step.reason.is_some() && action.is_none() {
            return Err(TrajectoryError::ReasonWithoutAction.into());
        }
        if action.is_some() {
            trajectory.num_actions += 1;
        }
        trajectory.steps.push(Step {
            observation,
            action,
            reason: step.reason,
        });
    }
    if let Some(first) = trajectory.steps.first() {
        if first.observation.is_none() {
            return Err(TrajectoryError::ActionBeforeObservation.into());
        }
    }
    if let Some(stored) = wire.num_actions {
        if stored != trajectory.num_actions {
            return Err(TrajectoryError::NumActionsMismatch {
                stored,
                actual: trajectory.num_actions,
            }
            .into());
        }
    }
    Ok(trajectory)
}

/// Writes trajectories as one record-format JSON object per line.
pub fn write_record_file(path: &Path, trajectories: &[Trajectory]) -> Result<(), RecordError> {
    let mut file = fs::File::create(path)?;
    for trajectory in trajectories {
        writeln!(file, "{}", to_record_json(trajectory))?;
    }
    Ok(())
}

/// Reads a line-delimited record file, reporting the 1-based line number of
/// the first bad record.
pub fn read_record_file(path: &Path) -> Result<Vec<Trajectory>, RecordError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trajectory = from_record_json(&line).map_err(|source| RecordError::Line {
            line: idx + 1,
            source: Box::new(source),
        })?;
        out.push(trajectory);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_trajectory(num_obs: usize) -> Trajectory {
        let mut t = Trajectory::new("demo", "do the thing", "sim://site/home");
        for i in 0..num_obs {
            t.push_observation(format!("page {i}"), format!("sim://site/p{i}"))
                .unwrap();
            if i + 1 < num_obs {
                t.push_action(Action::Click { element_id: i as u64 }, Some(format!("move {i}")))
                    .unwrap();
            }
        }
        t
    }

    #[test]
    fn builder_enforces_invariants() {
        let mut t = Trajectory::new("demo", "obj", "url");
        assert_eq!(
            t.push_action(Action::GoBack, None),
            Err(TrajectoryError::ActionBeforeObservation)
        );
        assert_eq!(
            t.push_observation("", "url"),
            Err(TrajectoryError::EmptyObservation)
        );
        t.push_observation("page", "url").unwrap();
        t.push_action(Action::GoBack, Some("why".into())).unwrap();
        assert_eq!(t.num_actions(), 1);
        t.check_invariants().unwrap();
    }

    #[test]
    fn splits_three_observation_trajectory() {
        let t = demo_trajectory(3);
        let subs = split_subsequences(&t).unwrap();
        assert_eq!(subs.len(), 3);
        // (o0,a0,o1), (o0,a0,o1,a1,o2), (o1,a1,o2) in (start, end) order.
        assert_eq!(subs[0].num_observations(), 2);
        assert_eq!(subs[0].num_actions(), 1);
        assert_eq!(subs[1].num_observations(), 3);
        assert_eq!(subs[1].num_actions(), 2);
        assert_eq!(subs[2].num_observations(), 2);
        assert_eq!(subs[2].observations().next().unwrap().content, "page 1");
        for sub in &subs {
            sub.check_invariants().unwrap();
            assert!(sub.steps().first().unwrap().observation.is_some());
            assert!(sub.steps().last().unwrap().observation.is_some());
            assert_eq!(sub.observations().next().unwrap().step_index, 0);
        }
    }

    #[test]
    fn splits_single_pair() {
        let t = demo_trajectory(2);
        let subs = split_subsequences(&t).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].num_observations(), 2);
    }

    #[test]
    fn four_observations_give_six_subsequences() {
        // Brute-force oracle: count (i, j) pairs with i < j.
        let n = 4usize;
        let mut expected = 0;
        for i in 0..n {
            for j in 0..n {
                if i < j {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 6);
        let subs = split_subsequences(&demo_trajectory(n)).unwrap();
        assert_eq!(subs.len(), expected);
    }

    #[test]
    fn degenerate_trajectory_is_rejected() {
        let mut t = Trajectory::new("demo", "obj", "url");
        t.push_observation("only page", "url").unwrap();
        assert_eq!(split_subsequences(&t), Err(TrajectoryError::Degenerate));
    }

    #[test]
    fn record_json_round_trip() {
        let mut t = demo_trajectory(3);
        t.success = Some(1.0);
        let json = to_record_json(&t);
        assert!(json.contains("\"num actions\":2"), "{json}");
        assert!(json.contains("\"type\":\"demo\""));
        let back = from_record_json(&json).unwrap();
        assert_eq!(back.num_actions(), t.num_actions());
        assert_eq!(back.num_observations(), t.num_observations());
        assert_eq!(back.success, t.success);
        assert_eq!(back.objective, t.objective);
        assert_eq!(
            back.actions().cloned().collect::<Vec<_>>(),
            t.actions().cloned().collect::<Vec<_>>()
        );
    }

    #[test]
    fn parses_external_record_shape() {
        // The record layout produced by other agent stacks: alternating
        // observation-only and action+reason steps, no step indices.
        let json = r#"{
            "type": "heap",
            "objective": "Add DkRgVNY Lace Bodysuit to my wish list",
            "url": "https://example.test/",
            "steps": [
                {"observation": "RootWebArea 'Search results'\n\tbutton [4606] 'Add to Wish List'"},
                {"action": "click [4606]", "reason": "The product has been found in the search results."},
                {"observation": "RootWebArea 'My Wish List'\n\ttext '3 items'"},
                {"action": "stop [Added DkRgVNY Lace Bodysuit to my wish list]", "reason": "The alert message confirms the addition."}
            ]
        }"#;
        let t = from_record_json(json).unwrap();
        assert_eq!(t.type_tag, "heap");
        assert_eq!(t.num_actions(), 2);
        assert_eq!(t.num_observations(), 2);
        assert_eq!(t.observations().next().unwrap().url, "https://example.test/");
        assert_eq!(
            t.actions().next().unwrap(),
            &Action::Click { element_id: 4606 }
        );
        // num_actions recomputed from steps matches the stored field.
        t.check_invariants().unwrap();
    }

    #[test]
    fn record_num_actions_mismatch_is_rejected() {
        let json = r#"{"type":"x","objective":"o","url":"u","steps":[{"observation":"page"},{"action":"go_back"}],"num actions":3}"#;
        let err = from_record_json(json).unwrap_err();
        assert!(matches!(
            err,
            RecordError::Invalid(TrajectoryError::NumActionsMismatch { stored: 3, actual: 1 })
        ));
    }

    #[test]
    fn record_file_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"type\":\"x\",\"objective\":\"o\",\"url\":\"u\",\"steps\":[{\"observation\":\"p\"}]}\nnot json\n").unwrap();
        match read_record_file(&path) {
            Err(RecordError::Line { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn render_text_includes_success_and_steps() {
        let mut t = demo_trajectory(2);
        t.success = Some(1.0);
        let text = t.render_text();
        assert!(text.contains("objective: do the thing"));
        assert!(text.contains("success: 1"));
        assert!(text.contains("observation:\npage 0"));
        assert!(text.contains("action: click [0]"));
        assert!(text.contains("reason: move 0"));
    }
}
