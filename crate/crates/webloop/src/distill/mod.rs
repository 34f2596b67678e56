//! Speculative data synthesis and multi-task dataset export.
//!
//! At each step the student proposes an action from the current observation
//! alone, while the teacher proposes a ranked candidate set from the full
//! history. The student's proposal is executed when it appears in the
//! candidate set under [`normalize_action`]; otherwise the teacher's rank-1
//! candidate replaces it.

mod export;

pub use export::{
    export_multitask, read_records, record_input, split_record_input, write_records,
    DistillationRecord, ExportManifest, ExportSkew, ManifestEntry, MultitaskExport, TaskKind,
    ACTION_TASK_DIRECTIVE, REASONING_TASK_DIRECTIVE,
};

use crate::action::{normalize_action, Action};
use crate::env::{EnvError, StepOutcome, WebEnv};
use crate::gateway::{predict_action, propose_candidates, Backend, GatewayError};
use crate::ragagent::BUDGET_STOP_ANSWER;
use crate::trajectory::{Observation, Trajectory};
use thiserror::Error;

/// A model that proposes one (action, reason) from the observation alone.
pub trait Proposer {
    fn propose(
        &mut self,
        instruction: &str,
        observation: &Observation,
    ) -> Result<(Action, String), DistillError>;
}

/// A model that proposes `k` ranked (action, reason) candidates from the
/// full interaction history.
pub trait CandidateProposer {
    fn candidates(
        &mut self,
        instruction: &str,
        history: &Trajectory,
        observation: &Observation,
        k: usize,
    ) -> Result<Vec<(Action, String)>, DistillError>;
}

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("teacher produced no candidates")]
    NoCandidates,
    #[error("environment: {0}")]
    Env(#[from] EnvError),
}

/// One step of speculative synthesis.
#[derive(Debug, Clone)]
pub struct SpeculativeOutcome {
    pub step_index: u32,
    pub proposed: (Action, String),
    /// Teacher candidates in rank order.
    pub candidates: Vec<(Action, String)>,
    /// True iff the proposal equals some candidate under normalization.
    pub accepted: bool,
    /// The proposal when accepted, the rank-1 candidate otherwise.
    pub executed: (Action, String),
}

/// Runs one speculative step: student proposal, teacher candidates, and the
/// accept-or-replace verdict. A student that fails to produce a parseable
/// action surfaces as a `stop [N/A parse failure]` sentinel proposal, which
/// is rejected like any other non-member.
pub fn speculative_step(
    student: &mut dyn Proposer,
    teacher: &mut dyn CandidateProposer,
    instruction: &str,
    history: &Trajectory,
    observation: &Observation,
    k: usize,
) -> Result<SpeculativeOutcome, DistillError> {
    let proposed = student.propose(instruction, observation)?;
    let candidates = teacher.candidates(instruction, history, observation, k)?;
    if candidates.is_empty() {
        return Err(DistillError::NoCandidates);
    }
    Ok(resolve_outcome(
        history.num_actions(),
        proposed,
        candidates,
    ))
}

fn resolve_outcome(
    step_index: u32,
    proposed: (Action, String),
    candidates: Vec<(Action, String)>,
) -> SpeculativeOutcome {
    let normalized = normalize_action(&proposed.0);
    let accepted = candidates
        .iter()
        .any(|(action, _)| normalize_action(action) == normalized);
    let executed = if accepted {
        proposed.clone()
    } else {
        candidates[0].clone()
    };
    SpeculativeOutcome {
        step_index,
        proposed,
        candidates,
        accepted,
        executed,
    }
}

/// Speculative step over two gateway backends. The student and teacher
/// requests are independent and issued concurrently.
pub fn speculative_step_backends(
    student: &Backend,
    teacher: &Backend,
    instruction: &str,
    history: &Trajectory,
    observation: &Observation,
    k: usize,
) -> Result<SpeculativeOutcome, DistillError> {
    let empty_history = Trajectory::new("speculative", instruction, observation.url.clone());
    let (proposed, candidates) = std::thread::scope(|scope| {
        let student_call = scope.spawn(|| {
            predict_action(student, instruction, &empty_history, observation, &[])
        });
        let teacher_call =
            scope.spawn(|| propose_candidates(teacher, instruction, history, observation, k));
        (
            student_call.join().expect("student call panicked"),
            teacher_call.join().expect("teacher call panicked"),
        )
    });
    let proposed = proposed?;
    let candidates = candidates?;
    if candidates.is_empty() {
        return Err(DistillError::NoCandidates);
    }
    Ok(resolve_outcome(history.num_actions(), proposed, candidates))
}

/// Adapters so gateway backends can stand in for either role.
pub struct BackendProposer<'a>(pub &'a Backend);

impl Proposer for BackendProposer<'_> {
    fn propose(
        &mut self,
        instruction: &str,
        observation: &Observation,
    ) -> Result<(Action, String), DistillError> {
        // Per the problem setup the student sees only the observation, so
        // the history section stays empty.
        let empty = Trajectory::new("speculative", instruction, observation.url.clone());
        Ok(predict_action(self.0, instruction, &empty, observation, &[])?)
    }
}

pub struct BackendCandidates<'a>(pub &'a Backend);

impl CandidateProposer for BackendCandidates<'_> {
    fn candidates(
        &mut self,
        instruction: &str,
        history: &Trajectory,
        observation: &Observation,
        k: usize,
    ) -> Result<Vec<(Action, String)>, DistillError> {
        Ok(propose_candidates(self.0, instruction, history, observation, k)?)
    }
}

/// A finished speculative episode.
#[derive(Debug, Clone)]
pub struct SpeculativeEpisode {
    pub trajectory: Trajectory,
    pub outcomes: Vec<SpeculativeOutcome>,
}

/// Iterates [`speculative_step`] against `env`, executing each step's chosen
/// action. The trajectory records executed actions with the reason of
/// whichever model supplied them, and terminates on a stop action, a
/// terminal state, or the step budget (with the synthetic budget stop).
pub fn run_speculative_episode(
    student: &mut dyn Proposer,
    teacher: &mut dyn CandidateProposer,
    env: &mut dyn WebEnv,
    instruction: &str,
    k: usize,
    max_steps: usize,
) -> Result<SpeculativeEpisode, DistillError> {
    let start = env.observation();
    let mut trajectory = Trajectory::new("speculative", instruction, start.url.clone());
    let mut outcomes = Vec::new();
    for _ in 0..max_steps {
        if env.terminated() {
            return Ok(SpeculativeEpisode { trajectory, outcomes });
        }
        let observation = env.observation();
        let outcome =
            speculative_step(student, teacher, instruction, &trajectory, &observation, k)?;
        let (action, reason) = outcome.executed.clone();
        trajectory
            .push_observation(observation.content, observation.url)
            .expect("environment observations are non-empty");
        trajectory
            .push_action(action.clone(), Some(reason))
            .expect("an observation precedes every action");
        outcomes.push(outcome);
        match env.apply(&action)? {
            StepOutcome::Terminal { .. } => return Ok(SpeculativeEpisode { trajectory, outcomes }),
            StepOutcome::Observation(_) => {}
        }
        if action.is_stop() {
            return Ok(SpeculativeEpisode { trajectory, outcomes });
        }
    }
    trajectory
        .push_action(
            Action::Stop {
                answer: BUDGET_STOP_ANSWER.to_string(),
            },
            Some("the step budget ran out before the objective was met".to_string()),
        )
        .expect("budget stop follows recorded steps");
    Ok(SpeculativeEpisode { trajectory, outcomes })
}

/// Asks the judge backend whether a trajectory is worth training on.
/// Unparseable verdicts fail.
pub fn judge_trajectory(trajectory: &Trajectory, judge: &Backend) -> Result<bool, DistillError> {
    let system = "You judge whether a web-navigation trajectory correctly accomplishes its objective.";
    let user = format!(
        "objective: {}\ntrajectory:\n{}\nAnswer PASS or FAIL with a brief rationale.",
        trajectory.objective,
        trajectory.render_text()
    );
    let response = judge.complete(system, &user)?;
    Ok(crate::gateway::parse::extract_pass_fail(&response))
}

/// Fraction of accepted outcomes; an empty list counts as 0.
pub fn acceptance_rate(outcomes: &[SpeculativeOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.accepted).count() as f64 / outcomes.len() as f64
}
