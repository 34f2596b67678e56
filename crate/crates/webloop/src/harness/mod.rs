//! The iteration driver: teacher pass, speculative distillation, student
//! exploration, ingestion, and the synergy metric over it all.

mod config;
mod report;

pub use config::{build_backend, BackendSpec, DetectorChoice, HarnessConfig, Role};
pub use report::{
    domain_breakdown, privacy_report, read_metrics_csv, write_metrics_csv, write_report,
    AcceptancePoint, DomainBreakdown, PrivacyReport, ReportFiles,
};

use crate::distill::{
    acceptance_rate, export_multitask, judge_trajectory, run_speculative_episode,
    DistillationRecord, SpeculativeOutcome,
};
use crate::gateway::{Backend, GatewayError};
use crate::knowledge::{synthesize_entries, EntrySource, KnowledgeError, KnowledgeStore};
use crate::ragagent::{run_episode, EpisodeConfig};
use crate::sim::{
    evaluate, reset, run_student_episode, train_student, DomainTag, OracleSession, OracleTeacher,
    SimError, SimSite, SimTask, StudentConfig, TabularStudent,
};
use crate::trajectory::Trajectory;
use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::hash::Hasher;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("fixture: {0}")]
    Fixture(#[from] SimError),
    #[error("knowledge base: {0}")]
    Knowledge(#[from] KnowledgeError),
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report: {0}")]
    Report(String),
}

/// Exit codes the CLI maps errors onto.
impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Fixture(_) => 3,
            _ => 1,
        }
    }
}

/// One row of the per-iteration metrics history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u32,
    pub sr_teacher: f64,
    pub sr_student: f64,
    pub sr_iter: f64,
    pub delta: f64,
    pub acceptance_rate: f64,
}

/// Synergy metric: the iterative scheme's success rate minus the better of
/// the two single-model success rates. Negative values are representable.
pub fn synergy(sr_iter: f64, sr_teacher: f64, sr_student: f64) -> f64 {
    sr_iter - sr_teacher.max(sr_student)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub domain_tag: DomainTag,
    pub success: bool,
}

/// Mutable state carried across iterations.
pub struct LoopState {
    pub iteration: u32,
    pub store: KnowledgeStore,
    pub student: TabularStudent,
    pub metrics_history: Vec<IterationMetrics>,
    pub sr_teacher_baseline: f64,
    /// Training pool accumulated across iterations.
    pub records: Vec<DistillationRecord>,
    /// Per-task outcome of the latest teacher evaluation pass.
    pub last_eval: Vec<TaskResult>,
    pub last_eval_trajectories: Vec<Trajectory>,
}

/// The deterministic backends one run uses.
pub struct LoopBackends {
    pub teacher: Backend,
    pub annotator: Backend,
    pub judges: Vec<Backend>,
    pub trajectory_judge: Backend,
}

impl LoopBackends {
    pub fn from_config(
        config: &HarnessConfig,
        suite: &Arc<Vec<SimSite>>,
    ) -> Result<Self, HarnessError> {
        let judges = (0..config.judge_panel)
            .map(|_| build_backend(config, Role::DebateJudge, suite))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LoopBackends {
            teacher: build_backend(config, Role::Teacher, suite)?,
            annotator: build_backend(config, Role::Annotator, suite)?,
            judges,
            trajectory_judge: build_backend(config, Role::TrajectoryJudge, suite)?,
        })
    }
}

fn derive_seed(master: u64, tag: &str, n: u64) -> u64 {
    let mut hasher = FnvHasher::with_key(master ^ 0xa076_1d64_78bd_642f);
    hasher.write(tag.as_bytes());
    hasher.write_u8(0x1f);
    hasher.write(&n.to_le_bytes());
    hasher.finish()
}

fn task_seed(master: u64, tag: &str, iteration: u32, task_id: &str) -> u64 {
    let mut hasher = FnvHasher::with_key(master ^ 0x2545_f491_4f6c_dd1d);
    hasher.write(tag.as_bytes());
    hasher.write_u8(0x1f);
    hasher.write(&iteration.to_le_bytes());
    hasher.write(task_id.as_bytes());
    hasher.finish()
}

/// All (site, task) pairs of a suite, in fixture order.
fn task_list(suite: &[SimSite]) -> Vec<(&SimSite, &SimTask)> {
    suite
        .iter()
        .flat_map(|site| site.tasks.iter().map(move |task| (site, task)))
        .collect()
}

fn with_pool<T: Send>(workers: usize, run: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(run))
}

/// Runs the teacher over every task against `store`, evaluating each
/// trajectory's terminal state. Pure measurement: nothing is ingested.
fn teacher_pass(
    suite: &[SimSite],
    store: &KnowledgeStore,
    teacher: &Backend,
    config: &HarnessConfig,
) -> Result<Vec<(TaskResult, Trajectory)>, HarnessError> {
    let episode_config = EpisodeConfig {
        max_steps: config.max_steps,
        per_strategy_k: config.per_strategy_k,
        record_reasons: true,
        model_generated_queries: false,
    };
    let tasks = task_list(suite);
    with_pool(config.workers, || {
        tasks
            .par_iter()
            .map(|(site, task)| {
                let mut env = reset(site, &task.id)?;
                let mut trajectory =
                    run_episode(&mut env, &task.instruction, teacher, store, &episode_config)
                        .map_err(|e| HarnessError::Config(format!("episode: {e}")))?;
                let success = evaluate(&env.terminal_state(), task);
                trajectory.success = Some(if success { 1.0 } else { 0.0 });
                Ok((
                    TaskResult {
                        task_id: task.id.clone(),
                        domain_tag: task.domain_tag,
                        success,
                    },
                    trajectory,
                ))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?
}

/// Speculative distillation episodes over every task.
fn speculative_pass(
    suite: &[SimSite],
    student: &TabularStudent,
    config: &HarnessConfig,
    iteration: u32,
) -> Result<Vec<(TaskResult, Trajectory, Vec<SpeculativeOutcome>)>, HarnessError> {
    let tasks = task_list(suite);
    with_pool(config.workers, || {
        tasks
            .par_iter()
            .map(|(site, task)| {
                let seed = task_seed(config.seed, "speculative", iteration, &task.id);
                // Greedy student proposals; exploration belongs to step 3.
                let mut student = student.fork(seed, 0.0);
                let oracle = OracleTeacher::from_sites(std::slice::from_ref(*site))
                    .with_accuracy(config.teacher_accuracy)
                    .with_candidate_k(config.candidate_k)
                    .with_seed(seed ^ 0x5eed);
                let mut teacher = OracleSession {
                    oracle,
                    site,
                    task_id: task.id.clone(),
                };
                let mut env = reset(site, &task.id)?;
                let episode = run_speculative_episode(
                    &mut student,
                    &mut teacher,
                    &mut env,
                    &task.instruction,
                    config.candidate_k,
                    config.max_steps,
                )
                .map_err(|e| HarnessError::Config(format!("speculative episode: {e}")))?;
                let success = evaluate(&env.terminal_state(), task);
                let mut trajectory = episode.trajectory;
                trajectory.success = Some(if success { 1.0 } else { 0.0 });
                Ok((
                    TaskResult {
                        task_id: task.id.clone(),
                        domain_tag: task.domain_tag,
                        success,
                    },
                    trajectory,
                    episode.outcomes,
                ))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?
}

/// Student exploration rollouts over every task.
fn exploration_pass(
    suite: &[SimSite],
    student: &TabularStudent,
    config: &HarnessConfig,
    iteration: u32,
    exploration_rate: f64,
    tag: &str,
) -> Result<Vec<(TaskResult, Trajectory)>, HarnessError> {
    let tasks = task_list(suite);
    with_pool(config.workers, || {
        tasks
            .par_iter()
            .map(|(site, task)| {
                let seed = task_seed(config.seed, tag, iteration, &task.id);
                let mut fork = student.fork(seed, exploration_rate);
                let mut env = reset(site, &task.id)?;
                let mut trajectory =
                    run_student_episode(&mut env, &task.instruction, &mut fork, config.max_steps);
                let success = evaluate(&env.terminal_state(), task);
                trajectory.success = Some(if success { 1.0 } else { 0.0 });
                Ok((
                    TaskResult {
                        task_id: task.id.clone(),
                        domain_tag: task.domain_tag,
                        success,
                    },
                    trajectory,
                ))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?
}

fn ingest_all(
    state: &mut LoopState,
    trajectories: &[Trajectory],
    backends: &LoopBackends,
    source: EntrySource,
    iteration: u32,
) -> Result<usize, HarnessError> {
    let mut added = 0;
    for trajectory in trajectories {
        if trajectory.num_observations() < 2 {
            continue;
        }
        let report = synthesize_entries(
            &mut state.store,
            trajectory,
            &backends.annotator,
            &backends.judges,
            source,
            iteration,
        )?;
        added += report.added.len();
    }
    Ok(added)
}

fn sr_of(results: &[TaskResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.success).count() as f64 / results.len() as f64
}

/// Initializes loop state: empty store, untrained student, and the
/// single-model teacher baseline measured against the empty store.
pub fn init_state(
    suite: &[SimSite],
    config: &HarnessConfig,
    backends: &LoopBackends,
) -> Result<LoopState, HarnessError> {
    if task_list(suite).is_empty() {
        return Err(HarnessError::Config("the fixture suite has no tasks".to_string()));
    }
    let store = KnowledgeStore::new();
    let baseline = teacher_pass(suite, &store, &backends.teacher, config)?;
    let sr_teacher_baseline = sr_of(&baseline.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>());
    let student = TabularStudent::new(&StudentConfig {
        exploration_rate: config.exploration_rate,
        seed: derive_seed(config.seed, "student", 0),
    });
    Ok(LoopState {
        iteration: 0,
        store,
        student,
        metrics_history: Vec::new(),
        sr_teacher_baseline,
        records: Vec::new(),
        last_eval: baseline.iter().map(|(r, _)| r.clone()).collect(),
        last_eval_trajectories: baseline.into_iter().map(|(_, t)| t).collect(),
    })
}

/// One full iteration of the loop:
/// 1. the teacher runs every task with the current store; judged
///    trajectories are ingested and feed the training pool;
/// 2. speculative episodes produce distillation data; the student retrains
///    on the accumulated pool;
/// 3. the retrained student explores every task with nonzero exploration;
/// 4. its judged trajectories are ingested for the next teacher pass.
///
/// Metrics (teacher baseline, student-alone, post-iteration teacher, the
/// synergy delta, and the speculative acceptance rate) are appended last.
pub fn run_iteration(
    state: &mut LoopState,
    suite: &[SimSite],
    config: &HarnessConfig,
    backends: &LoopBackends,
) -> Result<(), HarnessError> {
    if task_list(suite).is_empty() {
        return Err(HarnessError::Config("the fixture suite has no tasks".to_string()));
    }
    let iteration = state.iteration + 1;

    // Step 1: teacher trajectories, judged and ingested.
    let teacher_runs = teacher_pass(suite, &state.store, &backends.teacher, config)?;
    let teacher_trajectories: Vec<Trajectory> =
        teacher_runs.iter().map(|(_, t)| t.clone()).collect();
    ingest_all(state, &teacher_trajectories, backends, EntrySource::Teacher, iteration)?;

    // Step 2: speculative synthesis, export, retrain.
    let speculative_runs = speculative_pass(suite, &state.student, config, iteration)?;
    let outcomes: Vec<SpeculativeOutcome> = speculative_runs
        .iter()
        .flat_map(|(_, _, o)| o.iter().cloned())
        .collect();
    let iteration_acceptance = acceptance_rate(&outcomes);
    let mut training_pool: Vec<Trajectory> = Vec::new();
    for trajectory in &teacher_trajectories {
        if judge_trajectory(trajectory, &backends.trajectory_judge)
            .map_err(|e| HarnessError::Config(format!("trajectory judge: {e}")))?
        {
            for _ in 0..config.teacher_data_weight {
                training_pool.push(trajectory.clone());
            }
        }
    }
    for (_, trajectory, _) in &speculative_runs {
        if judge_trajectory(trajectory, &backends.trajectory_judge)
            .map_err(|e| HarnessError::Config(format!("trajectory judge: {e}")))?
        {
            for _ in 0..config.speculative_data_weight {
                training_pool.push(trajectory.clone());
            }
        }
    }
    let export = export_multitask(&training_pool);
    state.records.extend(export.records);
    let (student, _train_stats) = train_student(
        &state.records,
        &StudentConfig {
            exploration_rate: config.exploration_rate,
            seed: derive_seed(config.seed, "student", u64::from(iteration)),
        },
    );
    state.student = student;

    // Step 3: exploratory student rollouts.
    let exploration_runs = exploration_pass(
        suite,
        &state.student,
        config,
        iteration,
        config.exploration_rate,
        "explore",
    )?;

    // Step 4: student discoveries enter the store for the next teacher pass.
    let student_trajectories: Vec<Trajectory> =
        exploration_runs.iter().map(|(_, t)| t.clone()).collect();
    ingest_all(state, &student_trajectories, backends, EntrySource::Student, iteration)?;

    // Measurement: student alone (no exploration) and teacher with the
    // post-iteration store.
    let student_eval = exploration_pass(suite, &state.student, config, iteration, 0.0, "eval-student")?;
    let sr_student = sr_of(&student_eval.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>());
    let iter_eval = teacher_pass(suite, &state.store, &backends.teacher, config)?;
    let iter_results: Vec<TaskResult> = iter_eval.iter().map(|(r, _)| r.clone()).collect();
    let sr_iter = sr_of(&iter_results);
    let delta = synergy(sr_iter, state.sr_teacher_baseline, sr_student);
    state.metrics_history.push(IterationMetrics {
        iteration,
        sr_teacher: state.sr_teacher_baseline,
        sr_student,
        sr_iter,
        delta,
        acceptance_rate: iteration_acceptance,
    });
    state.last_eval = iter_results;
    state.last_eval_trajectories = iter_eval.into_iter().map(|(_, t)| t).collect();
    state.iteration = iteration;
    Ok(())
}

/// Runs `config.iterations` full iterations from a fresh state.
pub fn run_loop(suite: &Arc<Vec<SimSite>>, config: &HarnessConfig) -> Result<LoopState, HarnessError> {
    config.validate()?;
    let backends = LoopBackends::from_config(config, suite)?;
    let mut state = init_state(suite, config, &backends)?;
    for _ in 0..config.iterations {
        run_iteration(&mut state, suite, config, &backends)?;
    }
    Ok(state)
}
