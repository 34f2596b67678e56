//! Hybrid privacy mode: detect sensitive content per step and route the
//! prediction to the local or cloud backend.

mod model;
mod rules;

pub use model::{detect_model, PRIVACY_DETECT_PROMPT};
pub use rules::detect_rules;

use crate::action::{render_action, Action};
use crate::env::{StepOutcome, WebEnv};
use crate::gateway::{predict_action, Backend, Locality};
use crate::ragagent::{EpisodeConfig, EpisodeError, BACKEND_FAILURE_STOP_ANSWER, BUDGET_STOP_ANSWER};
use crate::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PrivacyCategory {
    Personal,
    Financial,
    Health,
    Security,
    Sensitive,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Rules,
    Model,
}

/// What a detector concluded about one piece of text. `found == false`
/// implies an empty category set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyVerdict {
    pub found: bool,
    pub categories: BTreeSet<PrivacyCategory>,
    pub detector: DetectorKind,
}

impl PrivacyVerdict {
    fn union(mut self, other: &PrivacyVerdict) -> PrivacyVerdict {
        self.found |= other.found;
        self.categories.extend(other.categories.iter().copied());
        self
    }
}

/// One routed step. A found verdict always routes local.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingLogEntry {
    pub step_index: u32,
    #[serde(flatten)]
    pub verdict: PrivacyVerdict,
    pub served_by: Locality,
}

/// Config-selected detector: deterministic rules by default, or a model
/// behind a local backend.
pub enum Detector<'a> {
    Rules,
    Model(&'a Backend),
}

impl Detector<'_> {
    pub fn scan(&self, text: &str) -> PrivacyVerdict {
        match self {
            Detector::Rules => detect_rules(text),
            Detector::Model(backend) => detect_model(backend, text),
        }
    }
}

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("hybrid pair misconfigured: {0}")]
    Config(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

/// Routing is a pure function of the verdict: found goes local, everything
/// else goes to the cloud.
pub fn route<'a>(verdict: &PrivacyVerdict, cloud: &'a Backend, local: &'a Backend) -> &'a Backend {
    if verdict.found {
        local
    } else {
        cloud
    }
}

/// Checks the locality declarations of a hybrid backend pair. Routing
/// assumes these were enforced at construction, not at call time.
pub fn validate_hybrid_pair(cloud: &Backend, local: &Backend) -> Result<(), PrivacyError> {
    if cloud.locality() != Locality::Cloud {
        return Err(PrivacyError::Config(format!(
            "cloud backend `{}` declares locality {:?}",
            cloud.name(),
            cloud.locality()
        )));
    }
    if local.locality() != Locality::Local {
        return Err(PrivacyError::Config(format!(
            "local backend `{}` declares locality {:?}",
            local.name(),
            local.locality()
        )));
    }
    Ok(())
}

/// Runs one episode in hybrid privacy mode. Each step the detector scans the
/// observation plus the previously executed action's text (the instruction
/// itself is scanned once at episode start and its verdict carries into
/// every step); the routed backend then predicts the action from the
/// current observation alone. Neither a knowledge store nor the interaction
/// history enters the prompts: routing is strictly per step, and a flagged
/// observation must never ride along into a later cloud request.
pub fn run_hybrid_episode(
    env: &mut dyn WebEnv,
    instruction: &str,
    cloud: &Backend,
    local: &Backend,
    detector: &Detector<'_>,
    config: &EpisodeConfig,
) -> Result<(Trajectory, Vec<RoutingLogEntry>), PrivacyError> {
    validate_hybrid_pair(cloud, local)?;
    let instruction_verdict = detector.scan(instruction);
    let start = env.observation();
    let mut trajectory = Trajectory::new("hybrid", instruction, start.url.clone());
    let mut logs = Vec::new();
    let mut last_action: Option<Action> = None;
    for step_index in 0..config.max_steps {
        if env.terminated() {
            return Ok((trajectory, logs));
        }
        let observation = env.observation();
        let step_text = match &last_action {
            Some(action) => format!("{}\n{}", observation.content, render_action(action)),
            None => observation.content.clone(),
        };
        let verdict = detector.scan(&step_text).union(&instruction_verdict);
        let backend = route(&verdict, cloud, local);
        logs.push(RoutingLogEntry {
            step_index: step_index as u32,
            verdict: verdict.clone(),
            served_by: backend.locality(),
        });
        let bare_history = Trajectory::new("hybrid", instruction, observation.url.clone());
        let (action, reason) =
            match predict_action(backend, instruction, &bare_history, &observation, &[]) {
                Ok(hit) => hit,
                Err(err) => {
                    log::warn!("routed backend failed, ending hybrid episode: {err}");
                    let _ = trajectory.push_observation(observation.content, observation.url);
                    let _ = trajectory.push_action(
                        Action::Stop {
                            answer: BACKEND_FAILURE_STOP_ANSWER.to_string(),
                        },
                        Some("the routed backend failed after retries".to_string()),
                    );
                    return Ok((trajectory, logs));
                }
            };
        trajectory
            .push_observation(observation.content, observation.url)
            .expect("environment observations are non-empty");
        trajectory
            .push_action(action.clone(), config.record_reasons.then_some(reason))
            .expect("an observation precedes every action");
        let outcome = env.apply(&action).map_err(|source| EpisodeError {
            partial: trajectory.clone(),
            source,
        })?;
        last_action = Some(action.clone());
        if matches!(outcome, StepOutcome::Terminal { .. }) || action.is_stop() {
            return Ok((trajectory, logs));
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
    Ok((trajectory, logs))
}

/// Per-step and per-category fractions over routing logs. Multi-category
/// steps count once per category and once toward found.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub total: usize,
    pub found_fraction: f64,
    pub not_found_fraction: f64,
    pub category_fractions: BTreeMap<PrivacyCategory, f64>,
}

pub fn category_stats(logs: &[RoutingLogEntry]) -> CategoryStats {
    if logs.is_empty() {
        return CategoryStats::default();
    }
    let total = logs.len();
    let found = logs.iter().filter(|l| l.verdict.found).count();
    let mut category_counts: BTreeMap<PrivacyCategory, usize> = BTreeMap::new();
    for log in logs {
        for category in &log.verdict.categories {
            *category_counts.entry(*category).or_default() += 1;
        }
    }
    CategoryStats {
        total,
        found_fraction: found as f64 / total as f64,
        not_found_fraction: (total - found) as f64 / total as f64,
        category_fractions: category_counts
            .into_iter()
            .map(|(c, n)| (c, n as f64 / total as f64))
            .collect(),
    }
}

/// Task-level aggregation: a task counts as found when any of its steps was
/// flagged, and contributes each category it ever saw once.
pub fn category_stats_by_task(per_task_logs: &[Vec<RoutingLogEntry>]) -> CategoryStats {
    let merged: Vec<RoutingLogEntry> = per_task_logs
        .iter()
        .filter(|logs| !logs.is_empty())
        .map(|logs| {
            let mut verdict = PrivacyVerdict {
                found: false,
                categories: BTreeSet::new(),
                detector: logs[0].verdict.detector,
            };
            for log in logs {
                verdict = verdict.union(&log.verdict);
            }
            RoutingLogEntry {
                step_index: 0,
                served_by: if verdict.found { Locality::Local } else { Locality::Cloud },
                verdict,
            }
        })
        .collect();
    category_stats(&merged)
}
