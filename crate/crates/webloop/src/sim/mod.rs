//! Deterministic simulated web environment: sites, tasks, goal evaluation.
//!
//! A site is a set of pages with accessibility-tree text and deterministic
//! transitions keyed by action patterns. Tasks name a start page and a goal
//! predicate decidable from the terminal state alone. Fixture files are
//! JSON documents `{name, domain_tag, base_url, pages, tasks}` checked by a
//! validating loader.

pub mod fixtures;
mod student;
mod teacher;

pub use student::{
    extract_element_ids, instruction_tokens, narrow_fingerprint, run_student_episode,
    student_predict, train_student, wide_fingerprint, StudentConfig, TabularStudent, TrainStats,
};
pub use teacher::{
    sim_annotator_backend, sim_debate_judge_backend, sim_filter_backend, sim_teacher_backend,
    sim_trajectory_judge_backend, teacher_candidates, teacher_predict, BernoulliStudent,
    OracleSession, OracleTeacher,
};

use crate::action::{parse_action, Action};
use crate::env::{EnvError, StepOutcome, WebEnv};
use crate::trajectory::Observation;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub type PageId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Shopping,
    ShoppingAdmin,
    Gitlab,
    Map,
    Reddit,
    Multisite,
}

impl DomainTag {
    pub const ALL: [DomainTag; 6] = [
        DomainTag::Shopping,
        DomainTag::ShoppingAdmin,
        DomainTag::Gitlab,
        DomainTag::Map,
        DomainTag::Reddit,
        DomainTag::Multisite,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DomainTag::Shopping => "shopping",
            DomainTag::ShoppingAdmin => "shopping_admin",
            DomainTag::Gitlab => "gitlab",
            DomainTag::Map => "map",
            DomainTag::Reddit => "reddit",
            DomainTag::Multisite => "multisite",
        }
    }
}

/// What an action must look like to trigger a transition. Patterns are
/// written in the action DSL; a `type` pattern with content `*` matches any
/// typed text. `press_enter` is ignored for matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionPattern {
    Click { element_id: u64 },
    TypeExact { element_id: u64, content: String },
    TypeAny { element_id: u64 },
}

impl ActionPattern {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        match parse_action(text) {
            Ok(Action::Click { element_id }) => Ok(ActionPattern::Click { element_id }),
            Ok(Action::Type { element_id, content, .. }) => {
                if content == "*" {
                    Ok(ActionPattern::TypeAny { element_id })
                } else {
                    Ok(ActionPattern::TypeExact { element_id, content })
                }
            }
            Ok(other) => Err(SimError::Fixture(format!(
                "`{}` cannot be a transition pattern; only click and type actions trigger transitions",
                other
            ))),
            Err(e) => Err(SimError::Fixture(format!("bad transition pattern `{text}`: {e}"))),
        }
    }

    pub fn element_id(&self) -> u64 {
        match self {
            ActionPattern::Click { element_id }
            | ActionPattern::TypeExact { element_id, .. }
            | ActionPattern::TypeAny { element_id } => *element_id,
        }
    }

    /// Exact patterns outrank wildcard patterns during lookup.
    fn matches(&self, action: &Action) -> bool {
        match (self, action) {
            (ActionPattern::Click { element_id }, Action::Click { element_id: id }) => {
                element_id == id
            }
            (
                ActionPattern::TypeExact { element_id, content },
                Action::Type { element_id: id, content: typed, .. },
            ) => element_id == id && content == typed,
            (ActionPattern::TypeAny { element_id }, Action::Type { element_id: id, .. }) => {
                element_id == id
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub pattern: ActionPattern,
    pub to: PageId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimPage {
    /// Accessibility-tree text with bracketed element ids.
    pub content: String,
    pub transitions: Vec<Transition>,
    /// Element ids of typeable fields whose text the episode records.
    pub fields: Vec<u64>,
}

/// Goal predicate over the terminal state. All present clauses must hold;
/// at least one clause is required.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Goal {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_page: Option<PageId>,
    /// Exact-match stop answer; extra prose around the value fails.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_equals: Option<FieldClause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_contains: Option<FieldClause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldClause {
    pub page: PageId,
    pub element_id: u64,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionStep {
    pub page: PageId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTask {
    pub id: String,
    pub instruction: String,
    pub start_page: PageId,
    pub goal: Goal,
    pub domain_tag: DomainTag,
    /// Hidden tasks are unknown to the oracle teacher; only exploration and
    /// the knowledge base can solve them.
    pub hidden: bool,
    /// Reference path for the oracle teacher, per page.
    pub solution: Vec<SolutionStep>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimSite {
    pub name: String,
    pub domain_tag: DomainTag,
    pub base_url: String,
    pub pages: BTreeMap<PageId, SimPage>,
    pub tasks: Vec<SimTask>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("task `{0}` not found")]
    TaskNotFound(String),
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("success rate needs at least one result")]
    EmptyResults,
    #[error("fixture io: {0}")]
    Io(#[from] std::io::Error),
}

impl SimSite {
    pub fn task(&self, task_id: &str) -> Result<&SimTask, SimError> {
        self.tasks
            .iter()
            .find(|t| t.id == task_id)
            .ok_or_else(|| SimError::TaskNotFound(task_id.to_string()))
    }

    pub fn page_url(&self, page: &str) -> String {
        format!("{}/{}", self.base_url, page)
    }

    /// Recovers the page id from an observation url of this site.
    pub fn page_from_url<'a>(&self, url: &'a str) -> Option<&'a str> {
        url.strip_prefix(&self.base_url)?.strip_prefix('/')
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.pages.is_empty() {
            return Err(SimError::Fixture(format!("site `{}` has no pages", self.name)));
        }
        for (page_id, page) in &self.pages {
            if page.content.trim().is_empty() {
                return Err(SimError::Fixture(format!("page `{page_id}` has empty content")));
            }
            let mut seen = Vec::new();
            for transition in &page.transitions {
                if !self.pages.contains_key(&transition.to) {
                    return Err(SimError::Fixture(format!(
                        "page `{page_id}` transitions to unknown page `{}`",
                        transition.to
                    )));
                }
                let marker = format!("[{}]", transition.pattern.element_id());
                if !page.content.contains(&marker) {
                    return Err(SimError::Fixture(format!(
                        "page `{page_id}` transition references element {marker} absent from its content"
                    )));
                }
                if seen.contains(&transition.pattern) {
                    return Err(SimError::Fixture(format!(
                        "page `{page_id}` has duplicate transition pattern {:?}",
                        transition.pattern
                    )));
                }
                seen.push(transition.pattern.clone());
            }
            for field in &page.fields {
                if !page.content.contains(&format!("[{field}]")) {
                    return Err(SimError::Fixture(format!(
                        "page `{page_id}` declares field [{field}] absent from its content"
                    )));
                }
            }
        }
        let mut ids = Vec::new();
        let mut instructions = Vec::new();
        for task in &self.tasks {
            if ids.contains(&&task.id) {
                return Err(SimError::Fixture(format!("duplicate task id `{}`", task.id)));
            }
            ids.push(&task.id);
            if task.instruction.trim().is_empty() {
                return Err(SimError::Fixture(format!("task `{}` has an empty instruction", task.id)));
            }
            // The scripted teacher identifies tasks by instruction text.
            if instructions.contains(&&task.instruction) {
                return Err(SimError::Fixture(format!(
                    "task `{}` duplicates another task's instruction",
                    task.id
                )));
            }
            instructions.push(&task.instruction);
            if !self.pages.contains_key(&task.start_page) {
                return Err(SimError::Fixture(format!(
                    "task `{}` starts on unknown page `{}`",
                    task.id, task.start_page
                )));
            }
            let goal = &task.goal;
            if goal.final_page.is_none()
                && goal.answer.is_none()
                && goal.field_equals.is_none()
                && goal.field_contains.is_none()
            {
                return Err(SimError::Fixture(format!("task `{}` has an empty goal", task.id)));
            }
            if let Some(page) = &goal.final_page {
                if !self.pages.contains_key(page) {
                    return Err(SimError::Fixture(format!(
                        "task `{}` goal names unknown page `{page}`",
                        task.id
                    )));
                }
            }
            for clause in [&goal.field_equals, &goal.field_contains].into_iter().flatten() {
                if !self.pages.contains_key(&clause.page) {
                    return Err(SimError::Fixture(format!(
                        "task `{}` goal names unknown page `{}`",
                        task.id, clause.page
                    )));
                }
            }
            if !task.hidden && task.solution.is_empty() {
                return Err(SimError::Fixture(format!(
                    "non-hidden task `{}` needs a solution path",
                    task.id
                )));
            }
            for step in &task.solution {
                if !self.pages.contains_key(&step.page) {
                    return Err(SimError::Fixture(format!(
                        "task `{}` solution references unknown page `{}`",
                        task.id, step.page
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Terminal snapshot a goal predicate is evaluated against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalState {
    pub final_page: PageId,
    /// Stop answer, when the episode ended on a stop action.
    pub answer: Option<String>,
    pub typed: BTreeMap<(PageId, u64), String>,
}

/// Per-episode mutable state over an immutable site.
pub struct EpisodeState<'a> {
    site: &'a SimSite,
    current: PageId,
    back_stack: Vec<PageId>,
    typed: BTreeMap<(PageId, u64), String>,
    next_obs_index: u32,
    terminal: Option<TerminalState>,
}

/// Resets the environment to a task's start state.
pub fn reset<'a>(site: &'a SimSite, task_id: &str) -> Result<EpisodeState<'a>, SimError> {
    let task = site.task(task_id)?;
    Ok(EpisodeState {
        site,
        current: task.start_page.clone(),
        back_stack: Vec::new(),
        typed: BTreeMap::new(),
        next_obs_index: 0,
        terminal: None,
    })
}

impl EpisodeState<'_> {
    pub fn current_page(&self) -> &str {
        &self.current
    }

    pub fn site(&self) -> &SimSite {
        self.site
    }

    /// Terminal snapshot: the recorded stop state, or the current state for
    /// episodes that ended without a stop (e.g. budget exhaustion).
    pub fn terminal_state(&self) -> TerminalState {
        self.terminal.clone().unwrap_or_else(|| TerminalState {
            final_page: self.current.clone(),
            answer: None,
            typed: self.typed.clone(),
        })
    }
}

impl WebEnv for EpisodeState<'_> {
    fn observation(&self) -> Observation {
        let page = &self.site.pages[&self.current];
        Observation {
            content: page.content.clone(),
            url: self.site.page_url(&self.current),
            step_index: self.next_obs_index,
        }
    }

    /// Click/type follow transitions (exact patterns outrank wildcards) and
    /// typing records field text; go_back pops the page stack; stop ends the
    /// episode with its answer; note/branch/prune and undefined actions are
    /// inert but still consume the step.
    fn apply(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        if let Some(terminal) = &self.terminal {
            return Ok(StepOutcome::Terminal {
                answer: terminal.answer.clone(),
            });
        }
        self.next_obs_index += 1;
        match action {
            Action::Stop { answer } => {
                let terminal = TerminalState {
                    final_page: self.current.clone(),
                    answer: Some(answer.clone()),
                    typed: self.typed.clone(),
                };
                self.terminal = Some(terminal.clone());
                return Ok(StepOutcome::Terminal { answer: terminal.answer });
            }
            Action::GoBack => {
                if let Some(previous) = self.back_stack.pop() {
                    self.current = previous;
                }
            }
            Action::Type { element_id, content, .. } => {
                let page = &self.site.pages[&self.current];
                if page.fields.contains(element_id) {
                    self.typed
                        .insert((self.current.clone(), *element_id), content.clone());
                }
                self.follow_transition(action);
            }
            Action::Click { .. } => {
                self.follow_transition(action);
            }
            // Plan-tree bookkeeping and notes consume a step without moving.
            Action::Note { .. } | Action::Branch { .. } | Action::Prune { .. } => {}
        }
        Ok(StepOutcome::Observation(self.observation()))
    }

    fn terminated(&self) -> bool {
        self.terminal.is_some()
    }
}

impl EpisodeState<'_> {
    fn follow_transition(&mut self, action: &Action) {
        let page = &self.site.pages[&self.current];
        let exact = page.transitions.iter().find(|t| {
            !matches!(t.pattern, ActionPattern::TypeAny { .. }) && t.pattern.matches(action)
        });
        let hit = exact.or_else(|| page.transitions.iter().find(|t| t.pattern.matches(action)));
        if let Some(transition) = hit {
            self.back_stack.push(self.current.clone());
            self.current = transition.to.clone();
        }
    }
}

/// Applies the task's goal predicate to a terminal state.
pub fn evaluate(terminal: &TerminalState, task: &SimTask) -> bool {
    let goal = &task.goal;
    if let Some(page) = &goal.final_page {
        if &terminal.final_page != page {
            return false;
        }
    }
    if let Some(expected) = &goal.answer {
        if terminal.answer.as_deref() != Some(expected.as_str()) {
            return false;
        }
    }
    if let Some(clause) = &goal.field_equals {
        let key = (clause.page.clone(), clause.element_id);
        if terminal.typed.get(&key) != Some(&clause.value) {
            return false;
        }
    }
    if let Some(clause) = &goal.field_contains {
        let key = (clause.page.clone(), clause.element_id);
        match terminal.typed.get(&key) {
            Some(text) if text.contains(&clause.value) => {}
            _ => return false,
        }
    }
    true
}

/// Fraction of successful results. At least one result is required.
pub fn success_rate(results: &[bool]) -> Result<f64, SimError> {
    if results.is_empty() {
        return Err(SimError::EmptyResults);
    }
    Ok(results.iter().filter(|r| **r).count() as f64 / results.len() as f64)
}

// ---------------------------------------------------------------------------
// Fixture JSON schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SiteWire {
    name: String,
    domain_tag: DomainTag,
    base_url: String,
    pages: BTreeMap<String, PageWire>,
    tasks: Vec<TaskWire>,
}

#[derive(Serialize, Deserialize)]
struct PageWire {
    content: String,
    #[serde(default)]
    transitions: Vec<TransitionWire>,
    #[serde(default)]
    fields: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct TransitionWire {
    action: String,
    to: String,
}

#[derive(Serialize, Deserialize)]
struct TaskWire {
    id: String,
    instruction: String,
    start_page: String,
    goal: Goal,
    #[serde(default)]
    domain_tag: Option<DomainTag>,
    #[serde(default)]
    hidden: bool,
    #[serde(default)]
    solution: Vec<SolutionStepWire>,
}

#[derive(Serialize, Deserialize)]
struct SolutionStepWire {
    page: String,
    action: String,
}

/// Parses and validates a site fixture document.
pub fn site_from_json(text: &str) -> Result<SimSite, SimError> {
    let wire: SiteWire =
        serde_json::from_str(text).map_err(|e| SimError::Fixture(format!("bad site json: {e}")))?;
    let mut pages = BTreeMap::new();
    for (id, page) in wire.pages {
        let mut transitions = Vec::new();
        for t in page.transitions {
            transitions.push(Transition {
                pattern: ActionPattern::parse(&t.action)?,
                to: t.to,
            });
        }
        pages.insert(
            id,
            SimPage {
                content: page.content,
                transitions,
                fields: page.fields,
            },
        );
    }
    let mut tasks = Vec::new();
    for t in wire.tasks {
        let mut solution = Vec::new();
        for step in t.solution {
            let action = parse_action(&step.action)
                .map_err(|e| SimError::Fixture(format!("task `{}` solution: {e}", t.id)))?;
            solution.push(SolutionStep { page: step.page, action });
        }
        tasks.push(SimTask {
            id: t.id,
            instruction: t.instruction,
            start_page: t.start_page,
            goal: t.goal,
            domain_tag: t.domain_tag.unwrap_or(wire.domain_tag),
            hidden: t.hidden,
            solution,
        });
    }
    let site = SimSite {
        name: wire.name,
        domain_tag: wire.domain_tag,
        base_url: wire.base_url,
        pages,
        tasks,
    };
    site.validate()?;
    Ok(site)
}

pub fn load_site(path: &Path) -> Result<SimSite, SimError> {
    site_from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_site() -> SimSite {
        site_from_json(
            r#"{
                "name": "tiny",
                "domain_tag": "shopping",
                "base_url": "sim://tiny",
                "pages": {
                    "home": {
                        "content": "RootWebArea 'Home'\n  link [1] 'Catalog'\n  combobox [2] 'Search'",
                        "transitions": [
                            {"action": "click [1]", "to": "catalog"},
                            {"action": "type [2] [lamp] [1]", "to": "lamp"},
                            {"action": "type [2] [*]", "to": "empty_results"}
                        ],
                        "fields": [2]
                    },
                    "catalog": {
                        "content": "RootWebArea 'Catalog'\n  link [3] 'Lamp'",
                        "transitions": [{"action": "click [3]", "to": "lamp"}]
                    },
                    "lamp": {"content": "RootWebArea 'Lamp'\n  text 'Price 19.99'\n  button [4] 'Add'"},
                    "empty_results": {"content": "RootWebArea 'Search results'\n  text 'nothing found'"}
                },
                "tasks": [
                    {
                        "id": "tiny-price",
                        "instruction": "What is the price of the lamp",
                        "start_page": "home",
                        "goal": {"answer": "19.99"},
                        "solution": [
                            {"page": "home", "action": "click [1]"},
                            {"page": "catalog", "action": "click [3]"},
                            {"page": "lamp", "action": "stop [19.99]"}
                        ]
                    },
                    {
                        "id": "tiny-reach-lamp",
                        "instruction": "Open the lamp page",
                        "start_page": "home",
                        "goal": {"final_page": "lamp"},
                        "solution": [
                            {"page": "home", "action": "click [1]"},
                            {"page": "catalog", "action": "click [3]"},
                            {"page": "lamp", "action": "stop [done]"}
                        ]
                    }
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn reset_returns_the_start_observation() {
        let site = tiny_site();
        let env = reset(&site, "tiny-price").unwrap();
        let obs = env.observation();
        assert!(obs.content.starts_with("RootWebArea 'Home'"));
        assert_eq!(obs.url, "sim://tiny/home");
        assert_eq!(obs.step_index, 0);
        // Reset twice: identical observation.
        let env2 = reset(&site, "tiny-price").unwrap();
        assert_eq!(env2.observation(), obs);
    }

    #[test]
    fn unknown_task_is_an_error() {
        let site = tiny_site();
        assert!(matches!(reset(&site, "nope"), Err(SimError::TaskNotFound(_))));
    }

    #[test]
    fn click_follows_transitions_and_inert_clicks_advance_the_index() {
        let site = tiny_site();
        let mut env = reset(&site, "tiny-price").unwrap();
        match env.apply(&Action::Click { element_id: 1 }).unwrap() {
            StepOutcome::Observation(obs) => {
                assert_eq!(obs.url, "sim://tiny/catalog");
                assert_eq!(obs.step_index, 1);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
        // No transition for element 99: same page, step index advanced.
        match env.apply(&Action::Click { element_id: 99 }).unwrap() {
            StepOutcome::Observation(obs) => {
                assert_eq!(obs.url, "sim://tiny/catalog");
                assert_eq!(obs.step_index, 2);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn type_records_text_and_exact_patterns_win() {
        let site = tiny_site();
        let mut env = reset(&site, "tiny-price").unwrap();
        let typed = Action::Type {
            element_id: 2,
            content: "lamp".to_string(),
            press_enter: true,
        };
        env.apply(&typed).unwrap();
        assert_eq!(env.current_page(), "lamp");
        assert_eq!(
            env.terminal_state().typed[&("home".to_string(), 2)],
            "lamp"
        );
        // A different query hits the wildcard transition.
        let mut env = reset(&site, "tiny-price").unwrap();
        env.apply(&Action::Type {
            element_id: 2,
            content: "socks".to_string(),
            press_enter: true,
        })
        .unwrap();
        assert_eq!(env.current_page(), "empty_results");
    }

    #[test]
    fn go_back_pops_and_note_is_inert() {
        let site = tiny_site();
        let mut env = reset(&site, "tiny-price").unwrap();
        env.apply(&Action::Click { element_id: 1 }).unwrap();
        env.apply(&Action::Note { content: "catalog seen".to_string() }).unwrap();
        assert_eq!(env.current_page(), "catalog");
        env.apply(&Action::GoBack).unwrap();
        assert_eq!(env.current_page(), "home");
        // Empty stack: inert.
        env.apply(&Action::GoBack).unwrap();
        assert_eq!(env.current_page(), "home");
    }

    #[test]
    fn stop_yields_terminal_with_the_answer() {
        let site = tiny_site();
        let mut env = reset(&site, "tiny-price").unwrap();
        let outcome = env
            .apply(&Action::Stop { answer: "ABC_123".to_string() })
            .unwrap();
        assert_eq!(
            outcome,
            StepOutcome::Terminal { answer: Some("ABC_123".to_string()) }
        );
        assert!(env.terminated());
        assert_eq!(env.terminal_state().answer.as_deref(), Some("ABC_123"));
    }

    #[test]
    fn evaluate_enforces_exact_answers() {
        let site = tiny_site();
        let task = site.task("tiny-price").unwrap();
        let mut env = reset(&site, "tiny-price").unwrap();
        env.apply(&Action::Click { element_id: 1 }).unwrap();
        env.apply(&Action::Click { element_id: 3 }).unwrap();
        env.apply(&Action::Stop { answer: "19.99".to_string() }).unwrap();
        assert!(evaluate(&env.terminal_state(), task));
        // Wrapping the value in prose fails the exact-value contract.
        let mut env = reset(&site, "tiny-price").unwrap();
        env.apply(&Action::Stop { answer: "The price is 19.99".to_string() }).unwrap();
        assert!(!evaluate(&env.terminal_state(), task));
    }

    #[test]
    fn page_goal_passes_without_a_stop() {
        let site = tiny_site();
        let task = site.task("tiny-reach-lamp").unwrap();
        let mut env = reset(&site, "tiny-reach-lamp").unwrap();
        env.apply(&Action::Click { element_id: 1 }).unwrap();
        env.apply(&Action::Click { element_id: 3 }).unwrap();
        // Budget-style termination: no stop recorded in the env.
        assert!(evaluate(&env.terminal_state(), task));
    }

    #[test]
    fn success_rate_arithmetic_and_empty_error() {
        assert_eq!(success_rate(&[true, true, true, false]).unwrap(), 0.75);
        assert_eq!(success_rate(&[false, false]).unwrap(), 0.0);
        assert!(matches!(success_rate(&[]), Err(SimError::EmptyResults)));
        // Permutation invariance.
        assert_eq!(
            success_rate(&[true, false, true]).unwrap(),
            success_rate(&[false, true, true]).unwrap()
        );
    }

    #[test]
    fn validation_catches_broken_fixtures() {
        let mut site = tiny_site();
        site.pages.get_mut("home").unwrap().transitions.push(Transition {
            pattern: ActionPattern::Click { element_id: 777 },
            to: "catalog".to_string(),
        });
        assert!(matches!(site.validate(), Err(SimError::Fixture(_))));
    }
}
