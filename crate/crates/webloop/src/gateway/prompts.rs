//! Prompt construction.
//!
//! Section sentinels (`objective:`, `interaction history:`, `external
//! knowledge:`, `current observation:`) are load-bearing: deterministic
//! scripted backends parse prompts by these exact lines, and the prompt
//! tests lock them down.

use crate::knowledge::KnowledgeEntry;
use crate::trajectory::{render_steps, Observation, Trajectory};
use std::fmt::Write as _;

/// Description of the action space, included as the system prompt of every
/// action-prediction request.
pub const ACTION_SPACE: &str = "You are a web-navigation agent. At each step you are given an objective, the interaction history, and the current webpage observation, and you reply with exactly one action command.\n\
The available commands are:\n\
click [id]: To click on an element with its numerical ID on the webpage. E.g., `click [7]`. If clicking on a specific element doesn't trigger the transition to your desired web state, this is due to the element's lack of interactivity or GUI visibility. In such cases, move on to interact with OTHER similar or relevant elements INSTEAD.\n\
go_back: To return to the previously viewed page.\n\
stop [answer]: To stop interaction and return response. Present your answer within the brackets. If the task doesn't require a textual answer, appears insurmountable, or finally finds no answer, you must indicate \"N/A\" plus all relevant reasons and information you gathered as the answer, e.g. `stop [N/A ...]`. A direct textual answer must be the exact value/token without any additional description or explanation: for a token request, use stop [ABC_123] not stop [The token is ABC_123]. You don't need to do more exploration after finishing the task.\n\
note [content]: To take note of all important info w.r.t. completing the task to enable reviewing it later. E.g., `note [Spent $10 on 4/1/2024]`.\n\
type [id] [content] [press_enter_after=0|1]: To type content into a field with a specific ID. By default, the \"Enter\" key is pressed after typing unless `press_enter_after` is set to 0. E.g., `type [15] [Carnegie Mellon University] [1]`. If you can't find what you're looking for on your first attempt, consider refining your search keywords by breaking them down or trying related terms.\n\
branch [parent_plan_id] [new_subplan_intent]: To create a new subplan based on PREVIOUS PLANS. Ensure the new subplan is connected to the appropriate parent plan by using its ID. E.g., `branch [12] [Navigate to the \"Issue\" page to check all the issues.]`\n\
prune [resume_plan_id] [reason]: To return to a previous plan state when the current plan is deemed impractical. Enter the ID of the plan state you want to resume. E.g., `prune [5] [The current page lacks items \"black speaker,\" prompting a return to the initial page to restart the item search.]`";

/// Optional chain-of-thought system preamble. When attached to a backend,
/// responses may open with a ```thinking block, which structured extraction
/// strips before parsing.
pub const DEFAULT_COT_PREAMBLE: &str = include_str!("../../assets/cot_preamble.txt");

/// Reply-format directive for single-action prediction.
pub const PREDICT_DIRECTIVE: &str =
    "Reply with exactly two lines:\nreason: <why this action>\naction: <one command>";

/// Reminder appended when the first response failed to parse.
pub const FORMAT_REMINDER: &str = "Reminder: your previous reply did not contain a parseable action. Reply with exactly two lines:\nreason: <why this action>\naction: <one command>";

pub fn candidates_directive(k: usize) -> String {
    format!(
        "Propose K={k} distinct ranked candidate next actions, best first. Reply with one block per candidate:\ncandidate <rank>:\nreason: <why>\naction: <one command>"
    )
}

/// Renders one knowledge entry the way it appears inside prompts.
pub fn render_entry(entry: &KnowledgeEntry) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "instruction: {}", entry.instruction);
    let _ = writeln!(out, "summary: {}", entry.summary);
    match entry.trajectory.success {
        Some(success) => {
            let _ = writeln!(out, "success: {success}");
        }
        None => {
            let _ = writeln!(out, "success: unknown");
        }
    }
    out.push_str("steps:\n");
    out.push_str(&render_steps(entry.trajectory.steps()));
    out
}

fn push_common_sections(out: &mut String, instruction: &str, history: &Trajectory, examples: &[KnowledgeEntry]) {
    let _ = writeln!(out, "objective: {instruction}");
    out.push_str("\ninteraction history:\n");
    if history.steps().is_empty() {
        out.push_str("none\n");
    } else {
        out.push_str(&render_steps(history.steps()));
    }
    // The external-knowledge section is omitted entirely when there are no
    // examples.
    if !examples.is_empty() {
        out.push_str("\nexternal knowledge:\n");
        for (i, entry) in examples.iter().enumerate() {
            let _ = writeln!(out, "external knowledge{i}:");
            out.push_str(&render_entry(entry));
        }
    }
}

fn push_observation(out: &mut String, observation: &Observation) {
    out.push_str("\ncurrent observation:\n");
    let _ = writeln!(out, "url: {}", observation.url);
    let _ = writeln!(out, "{}", observation.content);
}

/// User prompt for a single action prediction.
pub fn predict_prompt(
    instruction: &str,
    history: &Trajectory,
    observation: &Observation,
    examples: &[KnowledgeEntry],
) -> String {
    let mut out = String::new();
    push_common_sections(&mut out, instruction, history, examples);
    push_observation(&mut out, observation);
    out.push('\n');
    out.push_str(PREDICT_DIRECTIVE);
    out
}

/// User prompt requesting `k` ranked candidates.
pub fn candidates_prompt(
    instruction: &str,
    history: &Trajectory,
    observation: &Observation,
    k: usize,
) -> String {
    let mut out = String::new();
    push_common_sections(&mut out, instruction, history, &[]);
    push_observation(&mut out, observation);
    out.push('\n');
    out.push_str(&candidates_directive(k));
    out
}

/// Guidance text of the example-filtering step. The final bracketed list in
/// the model's reply names the knowledge entries worth keeping.
pub const FILTER_GUIDE: &str = "Another model needs to predict the next action based on the objective, interaction history, and observations. The system message tells it what it can do, the objective is the final goal, the interaction history is the finished steps, and the observation is what it sees now; based on these it predicts the next action to achieve the goal.\n\
External knowledge entries are additionally provided as examples to help finish the task. Evaluate whether the provided external knowledge can help the model predict an action, given the current objective, interaction history, and observation. Focus on helpful, not just related. If any external knowledge entries are useful, identify which ones have value and explain why. Finally, output the useful external knowledge entries in the format [External knowledge0, External knowledge1].";

/// User prompt of the filtering step over retrieved candidates.
pub fn filter_prompt(
    instruction: &str,
    observation: &Observation,
    candidates: &[KnowledgeEntry],
) -> String {
    let mut out = String::new();
    out.push_str(FILTER_GUIDE);
    out.push_str("\n\n");
    let _ = writeln!(out, "objective: {instruction}");
    push_observation(&mut out, observation);
    out.push('\n');
    for (i, entry) in candidates.iter().enumerate() {
        let _ = writeln!(out, "external knowledge{i}:");
        out.push_str(&render_entry(entry));
    }
    out.push_str("\nOutput the useful external knowledge entries in the format [External knowledge0, External knowledge1].");
    out
}

/// System prompt for action prediction and candidate proposal.
pub fn action_system_prompt() -> String {
    ACTION_SPACE.to_string()
}
