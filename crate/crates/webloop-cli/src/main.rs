//! Command-line driver: knowledge-base synthesis, teacher episodes,
//! speculative distillation, student training and exploration, privacy
//! scanning, the full loop, and report rendering.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use webloop::distill::{
    acceptance_rate, export_multitask, judge_trajectory, read_records, run_speculative_episode,
    write_records, ExportManifest, ManifestEntry,
};
use webloop::gateway::AuditLog;
use webloop::harness::{
    build_backend, domain_breakdown, init_state, privacy_report, read_metrics_csv, run_iteration,
    write_metrics_csv, write_report, HarnessConfig, HarnessError, IterationMetrics, LoopBackends,
    Role, TaskResult,
};
use webloop::knowledge::{content_hash, synthesize_entries, EntrySource, KnowledgeStore};
use webloop::privacy::{category_stats, category_stats_by_task, detect_rules, Detector, RoutingLogEntry};
use webloop::ragagent::{run_episode, EpisodeConfig};
use webloop::sim::{
    evaluate, fixtures, load_site, reset, run_student_episode, train_student, OracleSession,
    OracleTeacher, SimSite, StudentConfig, TabularStudent,
};
use webloop::trajectory::{read_record_file, write_record_file, Trajectory};

#[derive(Parser)]
#[command(name = "webloop", version, about = "Teacher-student web-agent loop over a simulated environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Task fixture: a site JSON path, a built-in name (`shopping`,
    /// `gitlab`, ...), or `all` for the six-domain suite.
    #[arg(long, default_value = "all")]
    tasks: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build knowledge-base entries from a trajectory record file.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Line-delimited trajectory records to ingest.
        #[arg(long)]
        trajectories: PathBuf,
        /// Existing store to extend.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run retrieval-augmented teacher episodes over the task fixture.
    Agent {
        #[command(flatten)]
        common: Common,
        /// Knowledge store consulted during episodes.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run speculative episodes and export multi-task training records.
    Distill {
        #[command(flatten)]
        common: Common,
        /// Student policy file; untrained when omitted.
        #[arg(long)]
        student: Option<PathBuf>,
    },
    /// Train a tabular student from a record file.
    TrainStudent {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        records: PathBuf,
    },
    /// Run exploratory student rollouts over the task fixture.
    Explore {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        student: Option<PathBuf>,
    },
    /// Run hybrid privacy-mode episodes, or scan a trajectory file offline.
    PrivacyScan {
        #[command(flatten)]
        common: Common,
        /// Scan these trajectory records instead of running episodes.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Drive the full iterative loop and write all reports.
    Loop {
        #[command(flatten)]
        common: Common,
        /// Iteration-count override.
        #[arg(long)]
        iterations: Option<u32>,
    },
    /// Re-render report files from a saved loop state directory.
    Report {
        /// Directory written by `loop`.
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn load_config(common: &Common) -> Result<HarnessConfig, HarnessError> {
    let mut config = match &common.config {
        Some(path) => HarnessConfig::from_file(path)?,
        None => HarnessConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn load_suite(spec: &str) -> Result<Arc<Vec<SimSite>>, HarnessError> {
    if spec == "all" || spec == "builtin:all" {
        return Ok(Arc::new(fixtures::builtin_suite()));
    }
    let name = spec.strip_prefix("builtin:").unwrap_or(spec);
    if fixtures::BUILTIN_NAMES.contains(&name) && !Path::new(spec).exists() {
        return Ok(Arc::new(vec![fixtures::builtin_site(name)?]));
    }
    Ok(Arc::new(vec![load_site(Path::new(spec))?]))
}

fn load_store(path: &Option<PathBuf>) -> Result<KnowledgeStore, HarnessError> {
    match path {
        Some(path) => Ok(KnowledgeStore::load(path)?),
        None => Ok(KnowledgeStore::new()),
    }
}

fn load_student(path: &Option<PathBuf>, config: &HarnessConfig) -> Result<TabularStudent, HarnessError> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| HarnessError::Config(format!("student file {}: {e}", path.display())))
        }
        None => Ok(TabularStudent::new(&StudentConfig {
            exploration_rate: config.exploration_rate,
            seed: config.seed,
        })),
    }
}

fn episode_config(config: &HarnessConfig) -> EpisodeConfig {
    EpisodeConfig {
        max_steps: config.max_steps,
        per_strategy_k: config.per_strategy_k,
        record_reasons: true,
        model_generated_queries: false,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::Report(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Synthesize { common, trajectories, store } => {
            let config = load_config(&common)?;
            let suite = load_suite(&common.tasks)?;
            std::fs::create_dir_all(&common.out)?;
            let mut kb = load_store(&store)?;
            let annotator = build_backend(&config, Role::Annotator, &suite)?;
            let judges: Vec<_> = (0..config.judge_panel)
                .map(|_| build_backend(&config, Role::DebateJudge, &suite))
                .collect::<Result<_, _>>()?;
            let records = read_record_file(&trajectories)
                .map_err(|e| HarnessError::Config(format!("trajectories: {e}")))?;
            let mut added = 0;
            let mut skipped = 0;
            for trajectory in &records {
                if trajectory.num_observations() < 2 {
                    skipped += 1;
                    continue;
                }
                added += synthesize_entries(
                    &mut kb,
                    trajectory,
                    &annotator,
                    &judges,
                    EntrySource::Teacher,
                    0,
                )?
                .added
                .len();
            }
            let out = common.out.join("store.jsonl");
            kb.save(&out)?;
            println!(
                "ingested {added} entries from {} trajectories ({skipped} degenerate) into {}",
                records.len(),
                out.display()
            );
            Ok(())
        }
        Command::Agent { common, store } => {
            let config = load_config(&common)?;
            let suite = load_suite(&common.tasks)?;
            std::fs::create_dir_all(&common.out)?;
            let kb = load_store(&store)?;
            let audit = Arc::new(AuditLog::with_file(&common.out.join("audit_teacher.jsonl"))?);
            let teacher = build_backend(&config, Role::Teacher, &suite)?.with_audit(audit);
            let episode_config = episode_config(&config);
            let mut trajectories = Vec::new();
            let mut results = Vec::new();
            for site in suite.iter() {
                for task in &site.tasks {
                    let mut env = reset(site, &task.id)?;
                    let mut trajectory =
                        run_episode(&mut env, &task.instruction, &teacher, &kb, &episode_config)
                            .map_err(|e| HarnessError::Config(format!("episode: {e}")))?;
                    let success = evaluate(&env.terminal_state(), task);
                    trajectory.success = Some(if success { 1.0 } else { 0.0 });
                    trajectories.push(trajectory);
                    results.push(TaskResult {
                        task_id: task.id.clone(),
                        domain_tag: task.domain_tag,
                        success,
                    });
                }
            }
            write_record_file(&common.out.join("trajectories.jsonl"), &trajectories)
                .map_err(|e| HarnessError::Report(e.to_string()))?;
            write_json(&common.out.join("eval_results.json"), &results)?;
            write_json(&common.out.join("domains.json"), &domain_breakdown(&results))?;
            let solved = results.iter().filter(|r| r.success).count();
            println!("teacher solved {solved}/{} tasks; outputs in {}", results.len(), common.out.display());
            Ok(())
        }
        Command::Distill { common, student } => {
            let config = load_config(&common)?;
            let suite = load_suite(&common.tasks)?;
            std::fs::create_dir_all(&common.out)?;
            let student = load_student(&student, &config)?;
            let judge = build_backend(&config, Role::TrajectoryJudge, &suite)?;
            let mut episodes = Vec::new();
            let mut outcomes = Vec::new();
            for site in suite.iter() {
                for task in &site.tasks {
                    let mut fork = student.fork(config.seed ^ fnv(&task.id), 0.0);
                    let oracle = OracleTeacher::from_sites(std::slice::from_ref(site))
                        .with_accuracy(config.teacher_accuracy)
                        .with_candidate_k(config.candidate_k)
                        .with_seed(config.seed ^ fnv(&task.id) ^ 0x5eed);
                    let mut teacher = OracleSession {
                        oracle,
                        site,
                        task_id: task.id.clone(),
                    };
                    let mut env = reset(site, &task.id)?;
                    let episode = run_speculative_episode(
                        &mut fork,
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
                    outcomes.extend(episode.outcomes);
                    episodes.push(trajectory);
                }
            }
            let mut kept = Vec::new();
            let mut manifest = ExportManifest::default();
            for trajectory in episodes {
                let pass = judge_trajectory(&trajectory, &judge)
                    .map_err(|e| HarnessError::Config(format!("judge: {e}")))?;
                manifest.entries.push(ManifestEntry {
                    content_hash: content_hash(&trajectory),
                    type_tag: trajectory.type_tag.clone(),
                    objective: trajectory.objective.clone(),
                    judge_pass: pass,
                });
                if pass {
                    kept.push(trajectory);
                }
            }
            let export = export_multitask(&kept);
            manifest.record_count = export.records.len();
            manifest.skew = export.skew;
            write_records(&common.out.join("records.jsonl"), &export.records)?;
            write_json(&common.out.join("manifest.json"), &manifest)?;
            println!(
                "exported {} records from {}/{} judged trajectories (acceptance rate {:.3}) into {}",
                export.records.len(),
                kept.len(),
                manifest.entries.len(),
                acceptance_rate(&outcomes),
                common.out.display()
            );
            Ok(())
        }
        Command::TrainStudent { common, records } => {
            let config = load_config(&common)?;
            std::fs::create_dir_all(&common.out)?;
            let records = read_records(&records)?;
            let (student, stats) = train_student(
                &records,
                &StudentConfig {
                    exploration_rate: config.exploration_rate,
                    seed: config.seed,
                },
            );
            let out = common.out.join("student.json");
            write_json(&out, &student)?;
            write_json(&common.out.join("train_stats.json"), &stats)?;
            println!(
                "trained on {} action and {} reasoning records ({} unparseable skipped) -> {}",
                stats.action_records,
                stats.reasoning_records,
                stats.skipped_unparseable,
                out.display()
            );
            Ok(())
        }
        Command::Explore { common, student } => {
            let config = load_config(&common)?;
            let suite = load_suite(&common.tasks)?;
            std::fs::create_dir_all(&common.out)?;
            let student = load_student(&student, &config)?;
            let mut trajectories = Vec::new();
            let mut results = Vec::new();
            for site in suite.iter() {
                for task in &site.tasks {
                    let mut fork =
                        student.fork(config.seed ^ fnv(&task.id), config.exploration_rate);
                    let mut env = reset(site, &task.id)?;
                    let mut trajectory =
                        run_student_episode(&mut env, &task.instruction, &mut fork, config.max_steps);
                    let success = evaluate(&env.terminal_state(), task);
                    trajectory.success = Some(if success { 1.0 } else { 0.0 });
                    results.push(TaskResult {
                        task_id: task.id.clone(),
                        domain_tag: task.domain_tag,
                        success,
                    });
                    trajectories.push(trajectory);
                }
            }
            write_record_file(&common.out.join("trajectories.jsonl"), &trajectories)
                .map_err(|e| HarnessError::Report(e.to_string()))?;
            write_json(&common.out.join("eval_results.json"), &results)?;
            let solved = results.iter().filter(|r| r.success).count();
            println!(
                "student explored {} tasks, {solved} successful; outputs in {}",
                results.len(),
                common.out.display()
            );
            Ok(())
        }
        Command::PrivacyScan { common, trajectories } => {
            let config = load_config(&common)?;
            std::fs::create_dir_all(&common.out)?;
            let per_task_logs = match trajectories {
                Some(path) => {
                    // Offline mode: rule-scan each recorded observation.
                    let records = read_record_file(&path)
                        .map_err(|e| HarnessError::Config(format!("trajectories: {e}")))?;
                    records
                        .iter()
                        .map(|trajectory| {
                            trajectory
                                .observations()
                                .map(|obs| {
                                    let verdict = detect_rules(&obs.content);
                                    RoutingLogEntry {
                                        step_index: obs.step_index,
                                        served_by: if verdict.found {
                                            webloop::gateway::Locality::Local
                                        } else {
                                            webloop::gateway::Locality::Cloud
                                        },
                                        verdict,
                                    }
                                })
                                .collect::<Vec<_>>()
                        })
                        .collect::<Vec<_>>()
                }
                None => {
                    let suite = load_suite(&common.tasks)?;
                    let cloud_audit =
                        Arc::new(AuditLog::with_file(&common.out.join("audit_cloud.jsonl"))?);
                    let cloud = build_backend(&config, Role::Cloud, &suite)?.with_audit(cloud_audit);
                    let local = build_backend(&config, Role::Local, &suite)?;
                    let detector_backend;
                    let detector = match config.detector {
                        webloop::harness::DetectorChoice::Rules => Detector::Rules,
                        webloop::harness::DetectorChoice::Model => {
                            detector_backend = build_backend(&config, Role::Detector, &suite)?;
                            Detector::Model(&detector_backend)
                        }
                    };
                    let episode_config = episode_config(&config);
                    let mut logs = Vec::new();
                    let mut trajectories = Vec::new();
                    for site in suite.iter() {
                        for task in &site.tasks {
                            let mut env = reset(site, &task.id)?;
                            let (trajectory, task_logs) = webloop::privacy::run_hybrid_episode(
                                &mut env,
                                &task.instruction,
                                &cloud,
                                &local,
                                &detector,
                                &episode_config,
                            )
                            .map_err(|e| HarnessError::Config(format!("hybrid episode: {e}")))?;
                            trajectories.push(trajectory);
                            logs.push(task_logs);
                        }
                    }
                    write_record_file(&common.out.join("trajectories.jsonl"), &trajectories)
                        .map_err(|e| HarnessError::Report(e.to_string()))?;
                    logs
                }
            };
            let mut log_file = std::fs::File::create(common.out.join("routing_log.jsonl"))?;
            for log in per_task_logs.iter().flatten() {
                use std::io::Write;
                let line = serde_json::json!({
                    "step_index": log.step_index,
                    "found": log.verdict.found,
                    "categories": log.verdict.categories,
                    "served_by": log.served_by,
                });
                writeln!(log_file, "{line}")?;
            }
            let stats = serde_json::json!({
                "per_step": category_stats(&per_task_logs.iter().flatten().cloned().collect::<Vec<_>>()),
                "per_task": category_stats_by_task(&per_task_logs),
            });
            write_json(&common.out.join("privacy.json"), &stats)?;
            println!("privacy scan complete; outputs in {}", common.out.display());
            Ok(())
        }
        Command::Loop { common, iterations } => {
            let mut config = load_config(&common)?;
            if let Some(iterations) = iterations {
                config.iterations = iterations;
            }
            let suite = load_suite(&common.tasks)?;
            std::fs::create_dir_all(&common.out)?;
            let backends = LoopBackends::from_config(&config, &suite)?;
            let mut state = init_state(&suite, &config, &backends)?;
            for _ in 0..config.iterations {
                run_iteration(&mut state, &suite, &config, &backends)?;
                let row = state.metrics_history.last().expect("iteration appends metrics");
                println!(
                    "iteration {}: sr_teacher {:.3} sr_student {:.3} sr_iter {:.3} delta {:.3} acceptance {:.3} store {}",
                    row.iteration,
                    row.sr_teacher,
                    row.sr_student,
                    row.sr_iter,
                    row.delta,
                    row.acceptance_rate,
                    state.store.len()
                );
            }
            state.store.save(&common.out.join("store.jsonl"))?;
            write_json(&common.out.join("student.json"), &state.student)?;
            write_json(&common.out.join("eval_results.json"), &state.last_eval)?;
            write_record_file(&common.out.join("eval_trajectories.jsonl"), &state.last_eval_trajectories)
                .map_err(|e| HarnessError::Report(e.to_string()))?;
            write_report(&state, &common.out)?;
            println!("loop outputs in {}", common.out.display());
            Ok(())
        }
        Command::Report { state, out } => {
            let out = out.unwrap_or_else(|| state.clone());
            std::fs::create_dir_all(&out)?;
            let metrics: Vec<IterationMetrics> = serde_json::from_str(
                &std::fs::read_to_string(state.join("metrics.json"))
                    .map_err(|e| HarnessError::Config(format!("metrics.json: {e}")))?,
            )
            .map_err(|e| HarnessError::Config(format!("metrics.json: {e}")))?;
            let results: Vec<TaskResult> = serde_json::from_str(
                &std::fs::read_to_string(state.join("eval_results.json"))
                    .map_err(|e| HarnessError::Config(format!("eval_results.json: {e}")))?,
            )
            .map_err(|e| HarnessError::Config(format!("eval_results.json: {e}")))?;
            let trajectories: Vec<Trajectory> =
                read_record_file(&state.join("eval_trajectories.jsonl"))
                    .map_err(|e| HarnessError::Config(format!("eval_trajectories.jsonl: {e}")))?;
            write_json(&out.join("metrics.json"), &metrics)?;
            write_metrics_csv(&out.join("metrics.csv"), &metrics)?;
            // Cross-check the two formats agree before publishing them.
            let reparsed = read_metrics_csv(&out.join("metrics.csv"))?;
            if reparsed != metrics {
                return Err(HarnessError::Report(
                    "csv/json metrics disagree after render".to_string(),
                ));
            }
            write_json(&out.join("domains.json"), &domain_breakdown(&results))?;
            write_json(&out.join("privacy.json"), &privacy_report(&trajectories))?;
            let series: Vec<serde_json::Value> = metrics
                .iter()
                .map(|m| {
                    serde_json::json!({"iteration": m.iteration, "acceptance_rate": m.acceptance_rate})
                })
                .collect();
            write_json(&out.join("acceptance.json"), &series)?;
            println!("report rendered into {}", out.display());
            Ok(())
        }
    }
}

fn fnv(text: &str) -> u64 {
    use std::hash::Hasher;
    let mut hasher = fnv_hasher();
    hasher.write(text.as_bytes());
    hasher.finish()
}

fn fnv_hasher() -> impl std::hash::Hasher {
    struct Fnv(u64);
    impl std::hash::Hasher for Fnv {
        fn finish(&self) -> u64 {
            self.0
        }
        fn write(&mut self, bytes: &[u8]) {
            for b in bytes {
                self.0 ^= u64::from(*b);
                self.0 = self.0.wrapping_mul(0x100000001b3);
            }
        }
    }
    Fnv(0xcbf29ce484222325)
}
