//! The seven-command web action DSL: parsing, rendering, normalization.
//!
//! Commands are single-line strings of the form `keyword [field] [field] ...`.
//! Bracketed fields may contain arbitrary text, including unbalanced `[`; the
//! final `]` on the line terminates the last field, and the fields before it
//! split greedily on `] [` boundaries. `parse_action(render_action(a)) == a`
//! holds for every constructible [`Action`].

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// A parsed web action.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    /// Click the element with the given numerical id.
    Click { element_id: u64 },
    /// Return to the previously viewed page.
    GoBack,
    /// Stop the episode and return the bracketed answer. An answer beginning
    /// with `N/A` marks the task as unanswerable and is preserved verbatim.
    Stop { answer: String },
    /// Record information for later review.
    Note { content: String },
    /// Type content into the field with the given id.
    Type {
        element_id: u64,
        content: String,
        press_enter: bool,
    },
    /// Open a new subplan under an existing plan node.
    Branch { parent_plan_id: u64, intent: String },
    /// Resume a previous plan state, giving the reason.
    Prune { resume_plan_id: u64, reason: String },
}

impl Action {
    /// Keyword that introduces this action in its textual form.
    pub fn keyword(&self) -> &'static str {
        match self {
            Action::Click { .. } => "click",
            Action::GoBack => "go_back",
            Action::Stop { .. } => "stop",
            Action::Note { .. } => "note",
            Action::Type { .. } => "type",
            Action::Branch { .. } => "branch",
            Action::Prune { .. } => "prune",
        }
    }

    /// True for `stop [...]` actions.
    pub fn is_stop(&self) -> bool {
        matches!(self, Action::Stop { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty action string")]
    Empty,
    #[error("unknown action keyword `{0}`")]
    UnknownKeyword(String),
    #[error("`{keyword}` is missing a bracketed field: expected {expected}")]
    MissingField {
        keyword: &'static str,
        expected: &'static str,
    },
    #[error("malformed field for `{keyword}`: {detail}")]
    MalformedField { keyword: &'static str, detail: String },
    #[error("unexpected text after `{keyword}` command: `{trailing}`")]
    TrailingText { keyword: &'static str, trailing: String },
}

/// Parses a single-line action command into its structured form.
///
/// Fields are extracted with surrounding whitespace trimmed. A `type` command
/// whose third field is absent presses Enter by default. Unknown keywords and
/// trailing text after a complete command are errors.
pub fn parse_action(text: &str) -> Result<Action, ParseError> {
    let line = text.trim();
    if line.is_empty() {
        return Err(ParseError::Empty);
    }
    let keyword: String = line
        .chars()
        .take_while(|c| !c.is_whitespace() && *c != '[')
        .collect();
    let rest = line[keyword.len()..].trim_start();
    match keyword.as_str() {
        "go_back" => {
            if rest.is_empty() {
                Ok(Action::GoBack)
            } else {
                Err(ParseError::TrailingText {
                    keyword: "go_back",
                    trailing: rest.to_string(),
                })
            }
        }
        "click" => {
            let inner = bracket_inner(rest, "click", "[element_id]")?;
            Ok(Action::Click {
                element_id: parse_id("click", &inner)?,
            })
        }
        "stop" => {
            let inner = bracket_inner(rest, "stop", "[answer]")?;
            Ok(Action::Stop {
                answer: inner.trim().to_string(),
            })
        }
        "note" => {
            let inner = bracket_inner(rest, "note", "[content]")?;
            Ok(Action::Note {
                content: inner.trim().to_string(),
            })
        }
        "type" => {
            let inner = bracket_inner(rest, "type", "[id] [content] [press_enter_after]")?;
            let (id_part, tail) = split_first(&inner).ok_or(ParseError::MissingField {
                keyword: "type",
                expected: "[id] [content]",
            })?;
            let (content, press_enter) = match tail.rfind("] [") {
                Some(pos) => {
                    let flag = tail[pos + 3..].trim();
                    let press = match flag {
                        "0" => false,
                        "1" => true,
                        other => {
                            return Err(ParseError::MalformedField {
                                keyword: "type",
                                detail: format!("press_enter_after must be 0 or 1, got `{other}`"),
                            })
                        }
                    };
                    (tail[..pos].trim().to_string(), press)
                }
                // Third field absent: Enter is pressed after typing.
                None => (tail.trim().to_string(), true),
            };
            Ok(Action::Type {
                element_id: parse_id("type", id_part)?,
                content,
                press_enter,
            })
        }
        "branch" => {
            let inner = bracket_inner(rest, "branch", "[parent_plan_id] [new_subplan_intent]")?;
            let (id_part, intent) = split_first(&inner).ok_or(ParseError::MissingField {
                keyword: "branch",
                expected: "[parent_plan_id] [new_subplan_intent]",
            })?;
            Ok(Action::Branch {
                parent_plan_id: parse_id("branch", id_part)?,
                intent: intent.trim().to_string(),
            })
        }
        "prune" => {
            let inner = bracket_inner(rest, "prune", "[resume_plan_id] [reason]")?;
            let (id_part, reason) = split_first(&inner).ok_or(ParseError::MissingField {
                keyword: "prune",
                expected: "[resume_plan_id] [reason]",
            })?;
            Ok(Action::Prune {
                resume_plan_id: parse_id("prune", id_part)?,
                reason: reason.trim().to_string(),
            })
        }
        other => Err(ParseError::UnknownKeyword(other.to_string())),
    }
}

/// Extracts the text between the opening `[` and the final `]` of the line,
/// rejecting any trailing text after that final `]`.
fn bracket_inner(rest: &str, keyword: &'static str, expected: &'static str) -> Result<String, ParseError> {
    if !rest.starts_with('[') {
        return Err(ParseError::MissingField { keyword, expected });
    }
    let last = rest.rfind(']').ok_or(ParseError::MissingField { keyword, expected })?;
    let trailing = rest[last + 1..].trim();
    if !trailing.is_empty() {
        return Err(ParseError::TrailingText {
            keyword,
            trailing: trailing.to_string(),
        });
    }
    Ok(rest[1..last].to_string())
}

/// Splits `inner` at the first `] [` boundary into (first field, remainder).
fn split_first(inner: &str) -> Option<(&str, &str)> {
    inner.find("] [").map(|pos| (&inner[..pos], &inner[pos + 3..]))
}

fn parse_id(keyword: &'static str, field: &str) -> Result<u64, ParseError> {
    field.trim().parse::<u64>().map_err(|_| ParseError::MalformedField {
        keyword,
        detail: format!("`{}` is not a nonnegative integer id", field.trim()),
    })
}

/// Renders the canonical textual form of an action.
///
/// `type` always carries an explicit third field so the rendering survives a
/// parse round trip even when the content itself contains `] [`.
pub fn render_action(action: &Action) -> String {
    match action {
        Action::Click { element_id } => format!("click [{element_id}]"),
        Action::GoBack => "go_back".to_string(),
        Action::Stop { answer } => format!("stop [{answer}]"),
        Action::Note { content } => format!("note [{content}]"),
        Action::Type {
            element_id,
            content,
            press_enter,
        } => format!(
            "type [{element_id}] [{content}] [{}]",
            if *press_enter { 1 } else { 0 }
        ),
        Action::Branch {
            parent_plan_id,
            intent,
        } => format!("branch [{parent_plan_id}] [{intent}]"),
        Action::Prune {
            resume_plan_id,
            reason,
        } => format!("prune [{resume_plan_id}] [{reason}]"),
    }
}

/// Collapses internal whitespace runs in text fields to single spaces and
/// trims the ends. Ids, flags, and letter case are unchanged. Used as the
/// equality key when testing candidate-set membership.
pub fn normalize_action(action: &Action) -> Action {
    let squash = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    match action {
        Action::Stop { answer } => Action::Stop { answer: squash(answer) },
        Action::Note { content } => Action::Note { content: squash(content) },
        Action::Type {
            element_id,
            content,
            press_enter,
        } => Action::Type {
            element_id: *element_id,
            content: squash(content),
            press_enter: *press_enter,
        },
        Action::Branch {
            parent_plan_id,
            intent,
        } => Action::Branch {
            parent_plan_id: *parent_plan_id,
            intent: squash(intent),
        },
        Action::Prune {
            resume_plan_id,
            reason,
        } => Action::Prune {
            resume_plan_id: *resume_plan_id,
            reason: squash(reason),
        },
        other => other.clone(),
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_action(self))
    }
}

impl FromStr for Action {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&render_action(self))
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_action(&text).map_err(|e| de::Error::custom(format!("bad action `{text}`: {e}")))
    }
}
