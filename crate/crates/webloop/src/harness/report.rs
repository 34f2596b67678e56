//! Machine-readable run reports: metrics history (CSV + JSON), per-domain
//! success breakdown, privacy category distribution, and the acceptance-rate
//! series.

use super::{HarnessError, IterationMetrics, LoopState, TaskResult};
use crate::gateway::Locality;
use crate::privacy::{category_stats, category_stats_by_task, detect_rules, CategoryStats, RoutingLogEntry};
use crate::sim::DomainTag;
use crate::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Success fractions overall and per domain, in the usual six-column shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBreakdown {
    pub overall: f64,
    pub domains: BTreeMap<String, f64>,
}

pub fn domain_breakdown(results: &[TaskResult]) -> DomainBreakdown {
    let mut per_domain: BTreeMap<String, (usize, usize)> = DomainTag::ALL
        .iter()
        .map(|tag| (tag.as_str().to_string(), (0usize, 0usize)))
        .collect();
    let mut successes = 0usize;
    for result in results {
        let slot = per_domain.entry(result.domain_tag.as_str().to_string()).or_default();
        slot.1 += 1;
        if result.success {
            slot.0 += 1;
            successes += 1;
        }
    }
    DomainBreakdown {
        overall: if results.is_empty() {
            0.0
        } else {
            successes as f64 / results.len() as f64
        },
        domains: per_domain
            .into_iter()
            .map(|(tag, (wins, total))| (tag, if total == 0 { 0.0 } else { wins as f64 / total as f64 }))
            .collect(),
    }
}

/// Privacy distribution over the rule detector's per-step verdicts, both
/// per step and per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub per_step: CategoryStats,
    pub per_task: CategoryStats,
}

pub fn privacy_report(trajectories: &[Trajectory]) -> PrivacyReport {
    let per_task_logs: Vec<Vec<RoutingLogEntry>> = trajectories
        .iter()
        .map(|trajectory| {
            trajectory
                .observations()
                .map(|obs| {
                    let verdict = detect_rules(&obs.content);
                    RoutingLogEntry {
                        step_index: obs.step_index,
                        served_by: if verdict.found { Locality::Local } else { Locality::Cloud },
                        verdict,
                    }
                })
                .collect()
        })
        .collect();
    let flat: Vec<RoutingLogEntry> = per_task_logs.iter().flatten().cloned().collect();
    PrivacyReport {
        per_step: category_stats(&flat),
        per_task: category_stats_by_task(&per_task_logs),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptancePoint {
    pub iteration: u32,
    pub acceptance_rate: f64,
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub metrics_json: PathBuf,
    pub metrics_csv: PathBuf,
    pub domains_json: PathBuf,
    pub privacy_json: PathBuf,
    pub acceptance_json: PathBuf,
}

pub fn write_metrics_csv(path: &Path, metrics: &[IterationMetrics]) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| HarnessError::Report(e.to_string()))?;
    writer
        .write_record(["iteration", "sr_teacher", "sr_student", "sr_iter", "delta", "acceptance_rate"])
        .map_err(|e| HarnessError::Report(e.to_string()))?;
    for row in metrics {
        writer
            .write_record([
                row.iteration.to_string(),
                row.sr_teacher.to_string(),
                row.sr_student.to_string(),
                row.sr_iter.to_string(),
                row.delta.to_string(),
                row.acceptance_rate.to_string(),
            ])
            .map_err(|e| HarnessError::Report(e.to_string()))?;
    }
    writer.flush().map_err(|e| HarnessError::Report(e.to_string()))?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<IterationMetrics>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::Report(e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| HarnessError::Report(e.to_string()))?;
        let field = |i: usize| -> Result<f64, HarnessError> {
            record
                .get(i)
                .ok_or_else(|| HarnessError::Report("short csv row".to_string()))?
                .parse::<f64>()
                .map_err(|e| HarnessError::Report(e.to_string()))
        };
        out.push(IterationMetrics {
            iteration: field(0)? as u32,
            sr_teacher: field(1)?,
            sr_student: field(2)?,
            sr_iter: field(3)?,
            delta: field(4)?,
            acceptance_rate: field(5)?,
        });
    }
    Ok(out)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Report(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes the full report bundle into `dir`.
pub fn write_report(state: &LoopState, dir: &Path) -> Result<ReportFiles, HarnessError> {
    fs::create_dir_all(dir)?;
    let files = ReportFiles {
        metrics_json: dir.join("metrics.json"),
        metrics_csv: dir.join("metrics.csv"),
        domains_json: dir.join("domains.json"),
        privacy_json: dir.join("privacy.json"),
        acceptance_json: dir.join("acceptance.json"),
    };
    write_json(&files.metrics_json, &state.metrics_history)?;
    write_metrics_csv(&files.metrics_csv, &state.metrics_history)?;
    write_json(&files.domains_json, &domain_breakdown(&state.last_eval))?;
    write_json(&files.privacy_json, &privacy_report(&state.last_eval_trajectories))?;
    let series: Vec<AcceptancePoint> = state
        .metrics_history
        .iter()
        .map(|m| AcceptancePoint {
            iteration: m.iteration,
            acceptance_rate: m.acceptance_rate,
        })
        .collect();
    write_json(&files.acceptance_json, &series)?;
    Ok(files)
}
