//! The tabular student policy: a desk-scale stand-in for a distilled small
//! model.
//!
//! Action records train an exact table keyed by a fingerprint of the page's
//! element ids plus the instruction token set. Reasoning records do not add
//! actions; they accumulate coverage on the ids-only fingerprint, which
//! unlocks an instruction-agnostic generalized table on exact-table misses.
//! That gating is what makes the action-only versus multi-task training
//! difference observable.

use crate::action::{parse_action, render_action, Action};
use crate::distill::{split_record_input, DistillationRecord, DistillError, Proposer, TaskKind};
use crate::env::{StepOutcome, WebEnv};
use crate::ragagent::BUDGET_STOP_ANSWER;
use crate::trajectory::{Observation, Trajectory};
use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hasher;
use std::sync::LazyLock;

static ELEMENT_ID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[(\d+)\]").expect("static regex"));

/// Sorted, deduplicated element ids mentioned in observation content.
pub fn extract_element_ids(content: &str) -> Vec<u64> {
    let mut ids: Vec<u64> = ELEMENT_ID
        .captures_iter(content)
        .filter_map(|c| c[1].parse().ok())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Lowercased instruction token set.
pub fn instruction_tokens(instruction: &str) -> BTreeSet<String> {
    crate::knowledge::embed::tokenize(instruction).collect()
}

fn hash_parts(parts: impl IntoIterator<Item = String>) -> u64 {
    let mut hasher = FnvHasher::default();
    for part in parts {
        hasher.write(part.as_bytes());
        hasher.write_u8(0x1f);
    }
    hasher.finish()
}

/// Fingerprint over sorted element ids plus the instruction token set.
pub fn narrow_fingerprint(element_ids: &[u64], tokens: &BTreeSet<String>) -> u64 {
    hash_parts(
        element_ids
            .iter()
            .map(|id| id.to_string())
            .chain(std::iter::once("|".to_string()))
            .chain(tokens.iter().cloned()),
    )
}

/// Fingerprint over sorted element ids only.
pub fn wide_fingerprint(element_ids: &[u64]) -> u64 {
    hash_parts(element_ids.iter().map(|id| id.to_string()))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StudentConfig {
    pub exploration_rate: f64,
    pub seed: u64,
}

impl Default for StudentConfig {
    fn default() -> Self {
        StudentConfig {
            exploration_rate: 0.0,
            seed: 0,
        }
    }
}

type ActionCounts = BTreeMap<String, u64>;

/// Frequency-table policy over observation fingerprints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabularStudent {
    exact: BTreeMap<u64, ActionCounts>,
    general: BTreeMap<u64, ActionCounts>,
    /// Reasoning-record coverage per wide fingerprint; nonzero coverage
    /// enables the general table for that page shape.
    coverage: BTreeMap<u64, u64>,
    pub exploration_rate: f64,
    pub seed: u64,
    #[serde(skip, default = "default_rng")]
    rng: ChaCha8Rng,
}

fn default_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl TabularStudent {
    pub fn new(config: &StudentConfig) -> Self {
        TabularStudent {
            exact: BTreeMap::new(),
            general: BTreeMap::new(),
            coverage: BTreeMap::new(),
            exploration_rate: config.exploration_rate,
            seed: config.seed,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    /// Copy of this student with a fresh generator; tables are shared by
    /// value. Parallel episodes each fork with their own derived seed.
    pub fn fork(&self, seed: u64, exploration_rate: f64) -> TabularStudent {
        let mut fork = self.clone();
        fork.seed = seed;
        fork.exploration_rate = exploration_rate;
        fork.rng = ChaCha8Rng::seed_from_u64(seed);
        fork
    }

    pub fn known_fingerprints(&self) -> usize {
        self.exact.len()
    }

    fn argmax(counts: &ActionCounts) -> Option<Action> {
        // Ties break by ascending action text; BTreeMap iterates in order.
        counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .and_then(|(text, _)| parse_action(text).ok())
    }

    fn random_click(&mut self, observation: &Observation) -> (Action, String) {
        let ids = extract_element_ids(&observation.content);
        if ids.is_empty() {
            return (
                Action::Stop {
                    answer: "N/A no interactive elements visible".to_string(),
                },
                "no element ids on the page; stopping".to_string(),
            );
        }
        let id = ids[self.rng.random_range(0..ids.len())];
        (
            Action::Click { element_id: id },
            "exploring: uniform choice over visible elements".to_string(),
        )
    }
}

/// Trains a student from distillation records. Action records feed the exact
/// and general tables; reasoning records only widen coverage. Unparseable
/// action outputs are skipped and counted.
pub fn train_student(records: &[DistillationRecord], config: &StudentConfig) -> (TabularStudent, TrainStats) {
    let mut student = TabularStudent::new(config);
    let mut stats = TrainStats::default();
    for record in records {
        let Some((observation, objective)) = split_record_input(&record.input) else {
            stats.malformed_inputs += 1;
            continue;
        };
        let ids = extract_element_ids(observation);
        let wide = wide_fingerprint(&ids);
        match record.task_kind {
            TaskKind::Action => {
                let Ok(action) = parse_action(&record.output) else {
                    stats.skipped_unparseable += 1;
                    continue;
                };
                let text = render_action(&action);
                let narrow = narrow_fingerprint(&ids, &instruction_tokens(objective));
                *student.exact.entry(narrow).or_default().entry(text.clone()).or_default() += 1;
                *student.general.entry(wide).or_default().entry(text).or_default() += 1;
                stats.action_records += 1;
            }
            TaskKind::Reasoning => {
                *student.coverage.entry(wide).or_default() += 1;
                stats.reasoning_records += 1;
            }
        }
    }
    (student, stats)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainStats {
    pub action_records: u32,
    pub reasoning_records: u32,
    pub skipped_unparseable: u32,
    pub malformed_inputs: u32,
}

/// Predicts from the current observation alone. With probability
/// `exploration_rate` the student samples uniformly over visible element-id
/// actions; otherwise it plays the exact-table argmax, falling back to the
/// generalized table where reasoning coverage exists, then to a seeded
/// random click.
pub fn student_predict(
    student: &mut TabularStudent,
    instruction: &str,
    observation: &Observation,
) -> (Action, String) {
    let explore_draw: f64 = student.rng.random();
    if explore_draw < student.exploration_rate {
        return student.random_click(observation);
    }
    let ids = extract_element_ids(&observation.content);
    let narrow = narrow_fingerprint(&ids, &instruction_tokens(instruction));
    if let Some(action) = student.exact.get(&narrow).and_then(TabularStudent::argmax) {
        return (action, "learned response for this page and objective".to_string());
    }
    // An exploring student keeps exploring unfamiliar (page, objective)
    // pairs; generalized exploitation is greedy-mode behavior.
    if student.exploration_rate == 0.0 {
        let wide = wide_fingerprint(&ids);
        if student.coverage.get(&wide).copied().unwrap_or(0) > 0 {
            if let Some(action) = student.general.get(&wide).and_then(TabularStudent::argmax) {
                return (
                    action,
                    "generalized from reasoning-covered experience on this page shape".to_string(),
                );
            }
        }
    }
    let (action, _) = student.random_click(observation);
    (action, "no training data for this page; random exploration".to_string())
}

impl Proposer for TabularStudent {
    fn propose(
        &mut self,
        instruction: &str,
        observation: &Observation,
    ) -> Result<(Action, String), DistillError> {
        Ok(student_predict(self, instruction, observation))
    }
}

/// Rolls the student through one episode, recording executed actions with
/// their templated reasons. Terminates on stop or the step budget.
pub fn run_student_episode(
    env: &mut dyn WebEnv,
    instruction: &str,
    student: &mut TabularStudent,
    max_steps: usize,
) -> Trajectory {
    let start = env.observation();
    let mut trajectory = Trajectory::new("explore", instruction, start.url.clone());
    for _ in 0..max_steps {
        if env.terminated() {
            return trajectory;
        }
        let observation = env.observation();
        let (action, reason) = student_predict(student, instruction, &observation);
        trajectory
            .push_observation(observation.content, observation.url)
            .expect("environment observations are non-empty");
        trajectory
            .push_action(action.clone(), Some(reason))
            .expect("an observation precedes every action");
        match env.apply(&action) {
            Ok(StepOutcome::Terminal { .. }) => return trajectory,
            Ok(StepOutcome::Observation(_)) => {}
            Err(_) => return trajectory,
        }
        if action.is_stop() {
            return trajectory;
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
    trajectory
}
