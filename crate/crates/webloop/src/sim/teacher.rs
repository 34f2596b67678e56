//! Scripted teacher machinery.
//!
//! [`OracleTeacher`] knows the solution action for (task, page) pairs of
//! non-hidden tasks and degrades deterministically under an accuracy knob.
//! [`sim_teacher_backend`] wraps the same policy as a scripted gateway
//! backend: it parses the prompts built by the gateway, answers prediction,
//! candidate, filtering, and retrieval-query requests, and imitates
//! knowledge-base examples on pages it has no solution for. All randomness
//! is derived from either a seeded generator (sequence mode) or a hash of
//! the request (responder mode), so identical requests always produce
//! identical responses.

use super::{PageId, SimSite, SimTask};
use crate::action::{normalize_action, parse_action, render_action, Action};
use crate::distill::{CandidateProposer, DistillError, Proposer};
use crate::gateway::{prompts, Backend, BackendConfig, Locality, ScriptedBehavior};
use crate::sim::student::extract_element_ids;
use crate::trajectory::{Observation, Trajectory};
use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::hash::Hasher;
use std::sync::Arc;

/// Scripted stand-in for the large model, keyed by (task id, page id).
#[derive(Debug, Clone)]
pub struct OracleTeacher {
    solutions: BTreeMap<(String, PageId), Action>,
    pub accuracy: f64,
    pub candidate_k: usize,
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl OracleTeacher {
    /// Builds the solution map from the non-hidden tasks of `sites`.
    pub fn from_sites(sites: &[SimSite]) -> Self {
        let mut solutions = BTreeMap::new();
        for site in sites {
            for task in &site.tasks {
                if task.hidden {
                    continue;
                }
                for step in &task.solution {
                    solutions.insert((task.id.clone(), step.page.clone()), step.action.clone());
                }
            }
        }
        OracleTeacher {
            solutions,
            accuracy: 1.0,
            candidate_k: 3,
            seed: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = accuracy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn with_candidate_k(mut self, k: usize) -> Self {
        self.candidate_k = k;
        self
    }

    pub fn solution(&self, task_id: &str, page: &str) -> Option<&Action> {
        self.solutions.get(&(task_id.to_string(), page.to_string()))
    }

    fn next_draws(&mut self) -> (f64, u64) {
        (self.rng.random::<f64>(), self.rng.random::<u64>())
    }
}

/// Ranked candidates for a (task, page) pair. With probability `accuracy`
/// the solution action is rank 1; otherwise rank 1 is a deterministic wrong
/// action and the solution appears at a lower rank with probability 0.5.
pub fn teacher_candidates(
    oracle: &mut OracleTeacher,
    site: &SimSite,
    task_id: &str,
    page: &str,
    k: usize,
) -> Vec<(Action, String)> {
    let (accuracy_draw, arrange) = oracle.next_draws();
    let solution = oracle.solution(task_id, page).cloned();
    let visible = site
        .pages
        .get(page)
        .map(|p| extract_element_ids(&p.content))
        .unwrap_or_default();
    build_candidates(solution.as_ref(), &visible, k, oracle.accuracy, accuracy_draw, arrange)
}

/// Rank-1 prediction under the same accuracy semantics.
pub fn teacher_predict(
    oracle: &mut OracleTeacher,
    site: &SimSite,
    task_id: &str,
    page: &str,
) -> (Action, String) {
    teacher_candidates(oracle, site, task_id, page, 1)
        .into_iter()
        .next()
        .expect("candidate construction always yields at least one action")
}

fn wrong_pool(solution: Option<&Action>, visible: &[u64], arrange: u64) -> Vec<(Action, String)> {
    let avoid = solution.map(normalize_action);
    let mut pool: Vec<(Action, String)> = Vec::new();
    if !visible.is_empty() {
        let offset = (arrange % visible.len() as u64) as usize;
        for i in 0..visible.len() {
            let id = visible[(offset + i) % visible.len()];
            pool.push((
                Action::Click { element_id: id },
                "this element looks related to the objective".to_string(),
            ));
        }
    }
    pool.push((Action::GoBack, "retrace to the previous page".to_string()));
    pool.push((
        Action::Note {
            content: "survey the page before acting".to_string(),
        },
        "gather context first".to_string(),
    ));
    pool.retain(|(action, _)| Some(normalize_action(action)) != avoid);
    pool
}

fn build_candidates(
    solution: Option<&Action>,
    visible: &[u64],
    k: usize,
    accuracy: f64,
    accuracy_draw: f64,
    arrange: u64,
) -> Vec<(Action, String)> {
    let k = k.max(1);
    let mut wrongs = wrong_pool(solution, visible, arrange).into_iter();
    let mut out: Vec<(Action, String)> = Vec::new();
    let correct = solution.is_some() && accuracy_draw < accuracy;
    if correct {
        out.push((
            solution.expect("checked above").clone(),
            "the objective names this control".to_string(),
        ));
    }
    // Whether a missed solution still surfaces at a lower rank (p = 0.5),
    // and where.
    let include_low = solution.is_some() && !correct && (arrange >> 8) & 1 == 0 && k > 1;
    let low_rank = if k > 1 {
        1 + ((arrange >> 16) as usize % (k - 1))
    } else {
        0
    };
    while out.len() < k {
        if include_low && out.len() == low_rank {
            out.push((
                solution.expect("include_low implies a solution").clone(),
                "a less certain reading of the objective".to_string(),
            ));
            continue;
        }
        match wrongs.next() {
            Some(candidate) => out.push(candidate),
            None => {
                let filler = Action::Note {
                    content: format!("re-examine option {}", out.len()),
                };
                out.push((filler, "placeholder exploration".to_string()));
            }
        }
    }
    out.truncate(k);
    out
}

/// [`CandidateProposer`] over an oracle bound to one site and task.
pub struct OracleSession<'a> {
    pub oracle: OracleTeacher,
    pub site: &'a SimSite,
    pub task_id: String,
}

impl CandidateProposer for OracleSession<'_> {
    fn candidates(
        &mut self,
        _instruction: &str,
        _history: &Trajectory,
        observation: &Observation,
        k: usize,
    ) -> Result<Vec<(Action, String)>, DistillError> {
        let page = self
            .site
            .page_from_url(&observation.url)
            .unwrap_or_default()
            .to_string();
        Ok(teacher_candidates(&mut self.oracle, self.site, &self.task_id, &page, k))
    }
}

/// Student stand-in that proposes the task's solution action with
/// probability `q` and a uniquely named note otherwise.
pub struct BernoulliStudent<'a> {
    pub site: &'a SimSite,
    pub task: &'a SimTask,
    pub q: f64,
    rng: ChaCha8Rng,
    counter: u64,
}

impl<'a> BernoulliStudent<'a> {
    pub fn new(site: &'a SimSite, task: &'a SimTask, q: f64, seed: u64) -> Self {
        BernoulliStudent {
            site,
            task,
            q,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: 0,
        }
    }
}

impl Proposer for BernoulliStudent<'_> {
    fn propose(
        &mut self,
        _instruction: &str,
        observation: &Observation,
    ) -> Result<(Action, String), DistillError> {
        let page = self.site.page_from_url(&observation.url).unwrap_or_default();
        let solution = self
            .task
            .solution
            .iter()
            .find(|s| s.page == page)
            .map(|s| s.action.clone());
        let draw: f64 = self.rng.random();
        self.counter += 1;
        match solution {
            Some(action) if draw < self.q => Ok((action, "the page matches the objective".to_string())),
            _ => Ok((
                Action::Note {
                    content: format!("explore option {}", self.counter),
                },
                "uncertain; noting an alternative".to_string(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Scripted gateway backends over the sim
// ---------------------------------------------------------------------------

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn request_draws(seed: u64, system: &str, user: &str) -> (f64, u64) {
    let mut hasher = FnvHasher::with_key(seed ^ 0x51_7c_c1_b7_27_22_0a_95);
    hasher.write(system.as_bytes());
    hasher.write_u8(0);
    hasher.write(user.as_bytes());
    let h = hasher.finish();
    let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
    (unit, splitmix64(h))
}

fn prompt_line<'t>(text: &'t str, prefix: &str) -> Option<&'t str> {
    text.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

fn section<'t>(text: &'t str, header: &str) -> Option<&'t str> {
    let start = text.find(header)? + header.len();
    let rest = &text[start..];
    let end = ["\nexternal knowledge:\n", "\ncurrent observation:\n"]
        .iter()
        .filter_map(|h| rest.find(h))
        .min()
        .unwrap_or(rest.len());
    Some(&rest[..end])
}

/// (url, content) of the current-observation section.
fn prompt_observation(user: &str) -> Option<(String, String)> {
    let rest = &user[user.find("current observation:\n")? + "current observation:\n".len()..];
    let chunk = rest.split("\n\n").next()?;
    let mut lines = chunk.lines();
    let url = lines.next()?.strip_prefix("url: ")?.to_string();
    let content: Vec<&str> = lines.collect();
    Some((url, content.join("\n")))
}

/// One parsed `external knowledgeN:` block of a prompt.
struct PromptEntry {
    index: usize,
    instruction: String,
    success_is_one: bool,
    body: String,
}

fn parse_prompt_entries(user: &str) -> Vec<PromptEntry> {
    let Some(section) = section(user, "external knowledge:\n") else {
        return Vec::new();
    };
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    for (pos, _) in section.match_indices("external knowledge") {
        let rest = &section[pos + "external knowledge".len()..];
        if let Some(colon) = rest.find(":\n") {
            if rest[..colon].chars().all(|c| c.is_ascii_digit()) && colon > 0 {
                blocks.push((pos, rest[..colon].parse().unwrap_or(usize::MAX)));
            }
        }
    }
    let mut out = Vec::new();
    for (i, (start, index)) in blocks.iter().enumerate() {
        let end = blocks.get(i + 1).map(|(s, _)| *s).unwrap_or(section.len());
        let body = &section[*start..end];
        out.push(PromptEntry {
            index: *index,
            instruction: prompt_line(body, "instruction: ").unwrap_or_default().to_string(),
            success_is_one: body.lines().any(|l| l.trim() == "success: 1"),
            body: body.to_string(),
        });
    }
    out
}

/// Number of prior visits to a page, counted from the history section by
/// exact observation-content match.
fn history_visits(user: &str, content: &str) -> usize {
    let Some(history) = section(user, "interaction history:\n") else {
        return 0;
    };
    let needle = format!("observation:\n{content}\n");
    history.matches(&needle).count()
}

/// The action taken after the (visit+1)-th occurrence of `content` in an
/// entry body.
fn imitate_from_entry(entry: &PromptEntry, content: &str, visit: usize) -> Option<Action> {
    let needle = format!("observation:\n{content}\n");
    let mut offset = 0;
    let mut occurrence = 0;
    while let Some(pos) = entry.body[offset..].find(&needle) {
        let after = offset + pos + needle.len();
        if occurrence == visit {
            let rest = &entry.body[after..];
            let line = rest.lines().find_map(|l| l.strip_prefix("action: "))?;
            return parse_action(line.trim()).ok();
        }
        occurrence += 1;
        offset = after;
    }
    None
}

fn candidates_k(user: &str) -> Option<usize> {
    let pos = user.rfind("Propose K=")?;
    let digits: String = user[pos + "Propose K=".len()..]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

fn render_candidates(candidates: &[(Action, String)]) -> String {
    let mut out = String::new();
    for (rank, (action, reason)) in candidates.iter().enumerate() {
        out.push_str(&format!(
            "candidate {}:\nreason: {reason}\naction: {}\n",
            rank + 1,
            render_action(action)
        ));
    }
    out
}

/// Filter verdict shared by the standalone filter backend and the teacher:
/// keep entries whose instruction matches the objective first (longest
/// demonstrations leading, since they subsume their own sub-spans), then
/// the rest, at most three total.
fn filter_response(user: &str) -> String {
    let objective = prompt_line(user, "objective: ").unwrap_or_default();
    let entries = parse_prompt_entries(user);
    let mut matching: Vec<&PromptEntry> =
        entries.iter().filter(|e| e.instruction == objective).collect();
    matching.sort_by_key(|e| std::cmp::Reverse(e.body.lines().filter(|l| l.starts_with("action: ")).count()));
    let mut order: Vec<usize> = matching.iter().map(|e| e.index).collect();
    for entry in &entries {
        if !order.contains(&entry.index) {
            order.push(entry.index);
        }
    }
    order.truncate(3);
    if order.is_empty() {
        return "No external knowledge was provided, so none can help.".to_string();
    }
    let list = order
        .iter()
        .map(|i| format!("External knowledge{i}"))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "Entries matching the current objective can guide the next action directly.\n[{list}]"
    )
}

struct SimTeacher {
    sites: Arc<Vec<SimSite>>,
    accuracy: f64,
    seed: u64,
}

impl SimTeacher {
    fn task_for_objective(&self, objective: &str) -> Option<(&SimSite, &SimTask)> {
        self.sites.iter().find_map(|site| {
            site.tasks
                .iter()
                .find(|t| t.instruction == objective)
                .map(|t| (site, t))
        })
    }

    fn site_for_url(&self, url: &str) -> Option<(&SimSite, String)> {
        self.sites.iter().find_map(|site| {
            site.page_from_url(url).map(|page| (site, page.to_string()))
        })
    }

    fn respond(&self, system: &str, user: &str) -> Option<String> {
        if user.starts_with(prompts::FILTER_GUIDE) {
            return Some(filter_response(user));
        }
        if user.starts_with("Write one short retrieval query") {
            let objective = prompt_line(user, "objective: ").unwrap_or_default();
            return Some(objective.to_string());
        }
        let objective = prompt_line(user, "objective: ")?;
        let (url, content) = prompt_observation(user)?;
        let page = self
            .site_for_url(&url)
            .map(|(_, page)| page)
            .unwrap_or_default();
        let k = candidates_k(user);
        let (accuracy_draw, arrange) = request_draws(self.seed, system, user);
        let visible = extract_element_ids(&content);

        let solution = self.task_for_objective(objective).and_then(|(site, task)| {
            if task.hidden {
                return None;
            }
            let _ = site;
            task.solution
                .iter()
                .find(|s| s.page == page)
                .map(|s| s.action.clone())
        });

        if let Some(k) = k {
            let candidates =
                match solution {
                    Some(ref action) => build_candidates(
                        Some(action),
                        &visible,
                        k,
                        self.accuracy,
                        accuracy_draw,
                        arrange,
                    ),
                    None => {
                        // No oracle knowledge: lead with imitation if the
                        // prompt carries a usable example.
                        let mut base = build_candidates(None, &visible, k, 0.0, 1.0, arrange);
                        if let Some(action) = self.imitated_action(user, objective, &content) {
                            base.insert(0, (action, "a stored experience took this step".to_string()));
                            base.truncate(k);
                        }
                        base
                    }
                };
            return Some(render_candidates(&candidates));
        }

        // Single-prediction request.
        if let Some(action) = solution {
            let (action, reason) = if accuracy_draw < self.accuracy {
                (action, "the objective names this control".to_string())
            } else {
                let wrongs = build_candidates(Some(&action), &visible, 1, 0.0, 1.0, arrange);
                wrongs.into_iter().next().expect("non-empty candidates")
            };
            return Some(format!("reason: {reason}\naction: {}", render_action(&action)));
        }
        if let Some(action) = self.imitated_action(user, objective, &content) {
            return Some(format!(
                "reason: a stored experience with this objective took this step here\naction: {}",
                render_action(&action)
            ));
        }
        Some(
            "reason: no solution is known for this page and no stored experience applies\naction: note [no applicable knowledge for this page]"
                .to_string(),
        )
    }

    /// Imitation: among prompt entries whose instruction equals the
    /// objective and whose trajectory succeeded, take the action that
    /// followed the current page at the same visit count.
    fn imitated_action(&self, user: &str, objective: &str, content: &str) -> Option<Action> {
        let visit = history_visits(user, content);
        parse_prompt_entries(user)
            .iter()
            .filter(|e| e.success_is_one && e.instruction == objective)
            .find_map(|e| imitate_from_entry(e, content, visit))
    }
}

/// Scripted backend implementing the oracle-teacher policy over prompt text.
/// It answers prediction, ranked-candidate, example-filtering, and
/// retrieval-query prompts; on pages without a known solution it imitates
/// successful same-objective knowledge entries from the prompt.
pub fn sim_teacher_backend(
    sites: Arc<Vec<SimSite>>,
    accuracy: f64,
    seed: u64,
    model_name: &str,
    locality: Locality,
) -> Backend {
    let teacher = SimTeacher { sites, accuracy, seed };
    Backend::scripted(
        BackendConfig::scripted(model_name, locality),
        ScriptedBehavior::new().with_responder(move |system, user| teacher.respond(system, user)),
    )
    .expect("scripted teacher config is valid")
}

/// Scripted annotator: echoes the sub-trajectory's objective as the
/// instruction and summarizes by action count.
pub fn sim_annotator_backend(model_name: &str) -> Backend {
    Backend::scripted(
        BackendConfig::scripted(model_name, Locality::Cloud),
        ScriptedBehavior::new().with_responder(|_, user| {
            let objective = prompt_line(user, "objective: ")?;
            let actions = user.lines().filter(|l| l.starts_with("action: ")).count();
            Some(format!(
                "instruction: {objective}\nsummary: {objective} via {actions} action(s)"
            ))
        }),
    )
    .expect("scripted annotator config is valid")
}

/// Scripted debate judge: approves entries whose trajectory succeeded and
/// whose instruction line is non-empty.
pub fn sim_debate_judge_backend(model_name: &str) -> Backend {
    Backend::scripted(
        BackendConfig::scripted(model_name, Locality::Cloud),
        ScriptedBehavior::new().with_responder(|_, user| {
            let instruction_ok = prompt_line(user, "instruction: ")
                .map(|i| !i.is_empty())
                .unwrap_or(false);
            let succeeded = user.lines().any(|l| l.trim() == "success: 1");
            Some(if instruction_ok && succeeded {
                "PASS: the instruction matches a successful, coherent trajectory".to_string()
            } else {
                "FAIL: the trajectory did not demonstrably accomplish the instruction".to_string()
            })
        }),
    )
    .expect("scripted judge config is valid")
}

/// Scripted trajectory judge for distillation data: PASS iff the serialized
/// trajectory records success AND ends in a deliberate stop (a non-`N/A`
/// answer). Budget exhaustion and bail-outs are not demonstration material
/// even when the goal state was met along the way.
pub fn sim_trajectory_judge_backend(model_name: &str) -> Backend {
    Backend::scripted(
        BackendConfig::scripted(model_name, Locality::Cloud),
        ScriptedBehavior::new().with_responder(|_, user| {
            let succeeded = user.lines().any(|l| l.trim() == "success: 1");
            let clean_stop = user
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("action: "))
                .and_then(|text| parse_action(text.trim()).ok())
                .is_some_and(|action| match action {
                    Action::Stop { answer } => !answer.starts_with("N/A"),
                    _ => false,
                });
            Some(if succeeded && clean_stop {
                "PASS: the trajectory reached its goal and ended deliberately".to_string()
            } else {
                "FAIL: no successful, cleanly terminated outcome recorded".to_string()
            })
        }),
    )
    .expect("scripted judge config is valid")
}

/// Standalone scripted filter with the same verdict rule the sim teacher
/// applies to filtering prompts.
pub fn sim_filter_backend(model_name: &str) -> Backend {
    Backend::scripted(
        BackendConfig::scripted(model_name, Locality::Cloud),
        ScriptedBehavior::new().with_responder(|_, user| Some(filter_response(user))),
    )
    .expect("scripted filter config is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::tests::tiny_site;

    fn oracle_for(site: &SimSite, accuracy: f64, seed: u64) -> OracleTeacher {
        OracleTeacher::from_sites(std::slice::from_ref(site))
            .with_accuracy(accuracy)
            .with_seed(seed)
    }

    #[test]
    fn full_accuracy_always_ranks_the_solution_first() {
        let site = tiny_site();
        let mut oracle = oracle_for(&site, 1.0, 7);
        for _ in 0..50 {
            let candidates = teacher_candidates(&mut oracle, &site, "tiny-price", "home", 3);
            assert_eq!(candidates[0].0, Action::Click { element_id: 1 });
            assert_eq!(candidates.len(), 3);
        }
    }

    #[test]
    fn zero_accuracy_with_k1_never_surfaces_the_solution() {
        let site = tiny_site();
        let mut oracle = oracle_for(&site, 0.0, 7);
        for _ in 0..50 {
            let candidates = teacher_candidates(&mut oracle, &site, "tiny-price", "home", 1);
            assert_eq!(candidates.len(), 1);
            assert_ne!(candidates[0].0, Action::Click { element_id: 1 });
        }
    }

    #[test]
    fn rank_one_correctness_tracks_accuracy() {
        let site = tiny_site();
        let mut oracle = oracle_for(&site, 0.8, 1234);
        let draws = 500;
        let mut correct = 0;
        for _ in 0..draws {
            let candidates = teacher_candidates(&mut oracle, &site, "tiny-price", "home", 3);
            if candidates[0].0 == (Action::Click { element_id: 1 }) {
                correct += 1;
            }
        }
        let rate = f64::from(correct) / f64::from(draws);
        assert!((rate - 0.8).abs() <= 0.05, "rank-1 correctness {rate}");
    }

    #[test]
    fn candidates_are_distinct_and_k_long() {
        let site = tiny_site();
        let mut oracle = oracle_for(&site, 0.5, 99);
        for _ in 0..50 {
            let candidates = teacher_candidates(&mut oracle, &site, "tiny-price", "home", 3);
            assert_eq!(candidates.len(), 3);
            for i in 0..candidates.len() {
                for j in i + 1..candidates.len() {
                    assert_ne!(
                        normalize_action(&candidates[i].0),
                        normalize_action(&candidates[j].0)
                    );
                }
            }
        }
    }

    #[test]
    fn hidden_tasks_are_unknown_to_the_oracle() {
        let mut site = tiny_site();
        site.tasks.push(SimTask {
            id: "tiny-hidden".to_string(),
            instruction: "secret path".to_string(),
            start_page: "home".to_string(),
            goal: super::super::Goal {
                final_page: Some("lamp".to_string()),
                ..Default::default()
            },
            domain_tag: super::super::DomainTag::Shopping,
            hidden: true,
            solution: vec![],
        });
        let oracle = OracleTeacher::from_sites(std::slice::from_ref(&site));
        assert!(oracle.solution("tiny-hidden", "home").is_none());
        assert!(oracle.solution("tiny-price", "home").is_some());
    }

    #[test]
    fn teacher_backend_replays_the_solution_end_to_end() {
        use crate::knowledge::KnowledgeStore;
        use crate::ragagent::{run_episode, EpisodeConfig};
        use crate::sim::{evaluate, reset};

        let site = tiny_site();
        let sites = Arc::new(vec![site.clone()]);
        let backend = sim_teacher_backend(sites, 1.0, 5, "sim-teacher", Locality::Cloud);
        let mut env = reset(&site, "tiny-price").unwrap();
        let task = site.task("tiny-price").unwrap();
        let trajectory = run_episode(
            &mut env,
            &task.instruction,
            &backend,
            &KnowledgeStore::new(),
            &EpisodeConfig {
                max_steps: 8,
                ..EpisodeConfig::default()
            },
        )
        .unwrap();
        assert!(evaluate(&env.terminal_state(), task));
        assert_eq!(trajectory.num_actions(), 3);
        assert_eq!(
            trajectory.actions().cloned().collect::<Vec<_>>(),
            task.solution.iter().map(|s| s.action.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn identical_requests_get_identical_teacher_responses() {
        let site = tiny_site();
        let sites = Arc::new(vec![site]);
        let backend = sim_teacher_backend(sites, 0.5, 5, "sim-teacher", Locality::Cloud);
        let system = prompts::action_system_prompt();
        let user = "objective: What is the price of the lamp\n\ninteraction history:\nnone\n\ncurrent observation:\nurl: sim://tiny/home\nRootWebArea 'Home'\n  link [1] 'Catalog'\n  combobox [2] 'Search'\n\nReply with exactly two lines:\nreason: <why this action>\naction: <one command>";
        let a = backend.complete(&system, user).unwrap();
        let b = backend.complete(&system, user).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bernoulli_student_mixes_solution_and_notes() {
        let site = tiny_site();
        let task = site.task("tiny-price").unwrap();
        let mut student = BernoulliStudent::new(&site, task, 0.5, 77);
        let obs = Observation {
            content: site.pages["home"].content.clone(),
            url: "sim://tiny/home".to_string(),
            step_index: 0,
        };
        let mut solutions = 0;
        let mut notes = 0;
        for _ in 0..100 {
            match student.propose(&task.instruction, &obs).unwrap().0 {
                Action::Click { element_id: 1 } => solutions += 1,
                Action::Note { .. } => notes += 1,
                other => panic!("unexpected proposal {other:?}"),
            }
        }
        assert!(solutions > 30 && notes > 30, "{solutions}/{notes}");
    }
}

#[cfg(test)]
mod episode_shape_tests {
    use super::*;
    use crate::distill::{acceptance_rate, run_speculative_episode};
    use crate::env::WebEnv;
    use crate::knowledge::KnowledgeStore;
    use crate::ragagent::{run_episode, EpisodeConfig};
    use crate::sim::fixtures::builtin_site;
    use crate::sim::{evaluate, reset};

    #[test]
    fn shopping_reset_returns_the_market_root_page() {
        let site = builtin_site("shopping").unwrap();
        let env = reset(&site, "shopping-wishlist-hongj").unwrap();
        let obs = env.observation();
        assert!(obs.content.starts_with("RootWebArea 'One Stop Market'"));
        assert_eq!(obs.step_index, 0);
        assert_eq!(obs.url, "sim://shopping/home");
    }

    #[test]
    fn wishlist_episode_has_the_four_action_shape() {
        // click, type-search, click add-to-wish-list, stop.
        let site = builtin_site("shopping").unwrap();
        let sites = Arc::new(vec![site.clone()]);
        let teacher = sim_teacher_backend(sites, 1.0, 3, "sim-teacher", Locality::Cloud);
        let task = site.task("shopping-wishlist-hongj").unwrap();
        let mut env = reset(&site, &task.id).unwrap();
        let trajectory = run_episode(
            &mut env,
            &task.instruction,
            &teacher,
            &KnowledgeStore::new(),
            &EpisodeConfig {
                max_steps: 10,
                ..EpisodeConfig::default()
            },
        )
        .unwrap();
        assert!(evaluate(&env.terminal_state(), task));
        assert_eq!(trajectory.num_actions(), 4);
        let actions: Vec<&Action> = trajectory.actions().collect();
        assert!(matches!(actions[0], Action::Click { .. }));
        assert!(matches!(actions[1], Action::Type { .. }));
        assert!(matches!(actions[2], Action::Click { .. }));
        assert!(matches!(actions[3], Action::Stop { .. }));
    }

    #[test]
    fn perfect_mimic_student_is_always_accepted() {
        let site = builtin_site("shopping").unwrap();
        let task = site.task("shopping-wishlist-hongj").unwrap();
        // Proposes the solution action on every page: always rank-1 under a
        // fully accurate teacher.
        let mut student = BernoulliStudent::new(&site, task, 1.0, 5);
        let oracle = OracleTeacher::from_sites(std::slice::from_ref(&site))
            .with_accuracy(1.0)
            .with_seed(6);
        let mut teacher = OracleSession {
            oracle,
            site: &site,
            task_id: task.id.clone(),
        };
        let mut env = reset(&site, &task.id).unwrap();
        let episode = run_speculative_episode(
            &mut student,
            &mut teacher,
            &mut env,
            &task.instruction,
            3,
            10,
        )
        .unwrap();
        assert_eq!(acceptance_rate(&episode.outcomes), 1.0);
        assert!(evaluate(&env.terminal_state(), task));
    }
}
