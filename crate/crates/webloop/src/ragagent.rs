//! The retrieval-augmented episode loop: retrieve, filter, predict, act,
//! record.

use crate::action::Action;
use crate::env::{EnvError, StepOutcome, WebEnv};
use crate::gateway::{predict_action, Backend, GatewayError};
use crate::knowledge::{filter_examples, retrieve_mixed, KnowledgeStore, RetrievalQuery};
use crate::trajectory::Trajectory;
use thiserror::Error;

/// Per-episode knobs.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    /// Budget of model-predicted actions per episode.
    pub max_steps: usize,
    pub per_strategy_k: usize,
    /// When false, rationales are dropped from the recorded trajectory.
    pub record_reasons: bool,
    /// When true, the retrieval query text is produced by the backend
    /// instead of assembled from the instruction and observation.
    pub model_generated_queries: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            max_steps: 20,
            per_strategy_k: 5,
            record_reasons: true,
            model_generated_queries: false,
        }
    }
}

/// Stop answer recorded when the step budget runs out.
pub const BUDGET_STOP_ANSWER: &str = "N/A step budget exhausted";
/// Stop answer recorded when the backend fails after retries.
pub const BACKEND_FAILURE_STOP_ANSWER: &str = "N/A backend failure";

#[derive(Debug, Error)]
#[error("episode failed after {} action(s): {source}", partial.num_actions())]
pub struct EpisodeError {
    /// Whatever had been recorded before the failure.
    pub partial: Trajectory,
    #[source]
    pub source: EnvError,
}

/// Runs one episode against `env`, which must be reset to the task's start
/// state. Each step retrieves and filters knowledge examples, asks the
/// backend for an action, records the (observation, action, reason) triple,
/// and applies the action. The episode ends on a `stop` action, a terminal
/// environment state, or the step budget (which records a synthetic
/// `stop [N/A step budget exhausted]` after the `max_steps` predicted
/// actions). Success is left unset: evaluation is the environment's job.
pub fn run_episode(
    env: &mut dyn WebEnv,
    instruction: &str,
    backend: &Backend,
    store: &KnowledgeStore,
    config: &EpisodeConfig,
) -> Result<Trajectory, EpisodeError> {
    let start = env.observation();
    let mut trajectory = Trajectory::new("rag", instruction, start.url.clone());
    for _ in 0..config.max_steps {
        if env.terminated() {
            return Ok(trajectory);
        }
        let observation = env.observation();
        let examples = match gather_examples(instruction, &trajectory, &observation, backend, store, config)
        {
            Ok(examples) => examples,
            Err(err) => {
                log::warn!("retrieval filtering failed, ending episode: {err}");
                record_backend_failure(&mut trajectory, &observation);
                return Ok(trajectory);
            }
        };
        let (action, reason) =
            match predict_action(backend, instruction, &trajectory, &observation, &examples) {
                Ok(hit) => hit,
                Err(err) => {
                    log::warn!("backend failed after retries, ending episode: {err}");
                    record_backend_failure(&mut trajectory, &observation);
                    return Ok(trajectory);
                }
            };
        trajectory
            .push_observation(observation.content, observation.url)
            .expect("environment observations are non-empty");
        trajectory
            .push_action(action.clone(), config.record_reasons.then_some(reason))
            .expect("an observation precedes every action");
        match env.apply(&action) {
            Ok(StepOutcome::Terminal { .. }) => return Ok(trajectory),
            Ok(StepOutcome::Observation(_)) => {}
            Err(source) => {
                return Err(EpisodeError {
                    partial: trajectory,
                    source,
                })
            }
        }
        if action.is_stop() {
            return Ok(trajectory);
        }
    }
    // Budget exhausted without a stop: force termination on record.
    trajectory
        .push_action(
            Action::Stop {
                answer: BUDGET_STOP_ANSWER.to_string(),
            },
            config
                .record_reasons
                .then(|| "the step budget ran out before the objective was met".to_string()),
        )
        .expect("budget stop follows recorded steps");
    Ok(trajectory)
}

fn gather_examples(
    instruction: &str,
    history: &Trajectory,
    observation: &crate::trajectory::Observation,
    backend: &Backend,
    store: &KnowledgeStore,
    config: &EpisodeConfig,
) -> Result<Vec<crate::knowledge::KnowledgeEntry>, GatewayError> {
    if store.is_empty() {
        return Ok(Vec::new());
    }
    let instruction_text = if config.model_generated_queries {
        let response = backend.complete(
            "You write short retrieval queries.",
            &format!(
                "Write one short retrieval query for relevant past experience.\nobjective: {instruction}\ncurrent observation:\n{}\nReply with the query only.",
                observation.content
            ),
        )?;
        let query = response.lines().next().unwrap_or_default().trim().to_string();
        if query.is_empty() {
            instruction.to_string()
        } else {
            query
        }
    } else {
        instruction.to_string()
    };
    let query = RetrievalQuery {
        instruction: instruction_text,
        observation: Some(observation.clone()),
        partial_trajectory: Some(history.clone()),
        per_strategy_k: config.per_strategy_k,
    };
    let candidates = retrieve_mixed(&query, store);
    let filtered = filter_examples(&candidates, instruction, observation, backend).map_err(
        |err| match err {
            crate::knowledge::KnowledgeError::Gateway(g) => g,
            other => GatewayError::Config(other.to_string()),
        },
    )?;
    Ok(filtered)
}

fn record_backend_failure(trajectory: &mut Trajectory, observation: &crate::trajectory::Observation) {
    let _ = trajectory.push_observation(observation.content.clone(), observation.url.clone());
    let _ = trajectory.push_action(
        Action::Stop {
            answer: BACKEND_FAILURE_STOP_ANSWER.to_string(),
        },
        Some("the backend failed after retries".to_string()),
    );
}
