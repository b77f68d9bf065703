//! Page operation actions and their textual grammar.
//!
//! Canonical forms:
//!
//! ```text
//! click [id]
//! type [id] [text]
//! scroll [up|down]
//! goto [url]
//! go_back
//! stop [answer]
//! ```
//!
//! The parser is lenient about keyword case, surrounding backticks and a
//! `direction=` prefix on scroll; rendering always produces the canonical
//! form, which is also what observations report as the previous action.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::validate::{join, Validate, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScrollDirection {
    Up,
    Down,
}

impl fmt::Display for ScrollDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScrollDirection::Up => "up",
            ScrollDirection::Down => "down",
        })
    }
}

/// One primitive environment action.
///
/// Serialized as its canonical text so transcripts stay readable and
/// replay compares exactly what the agent saw.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PageAction {
    Click { id: u32 },
    Type { id: u32, text: String },
    Scroll(ScrollDirection),
    Goto { url: String },
    GoBack,
    Stop { answer: String },
}

impl PageAction {
    pub fn kind(&self) -> &'static str {
        match self {
            PageAction::Click { .. } => "click",
            PageAction::Type { .. } => "type",
            PageAction::Scroll(_) => "scroll",
            PageAction::Goto { .. } => "goto",
            PageAction::GoBack => "go_back",
            PageAction::Stop { .. } => "stop",
        }
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, PageAction::Stop { .. })
    }

    pub fn parse(text: &str) -> Result<Self, ActionParseError> {
        parse_action(text)
    }
}

impl fmt::Display for PageAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PageAction::Click { id } => write!(f, "click [{id}]"),
            PageAction::Type { id, text } => write!(f, "type [{id}] [{text}]"),
            PageAction::Scroll(dir) => write!(f, "scroll [{dir}]"),
            PageAction::Goto { url } => write!(f, "goto [{url}]"),
            PageAction::GoBack => f.write_str("go_back"),
            PageAction::Stop { answer } => write!(f, "stop [{answer}]"),
        }
    }
}

impl FromStr for PageAction {
    type Err = ActionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

impl From<PageAction> for String {
    fn from(action: PageAction) -> String {
        action.to_string()
    }
}

impl TryFrom<String> for PageAction {
    type Error = ActionParseError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        parse_action(&value)
    }
}

impl Validate for PageAction {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        match self {
            PageAction::Type { text, .. } if text.is_empty() => {
                out.push(Violation::new(join(path, "text"), "type requires text"))
            }
            PageAction::Goto { url } if url.trim().is_empty() => {
                out.push(Violation::new(join(path, "target"), "goto requires a url"))
            }
            _ => {}
        }
        let rendered = self.to_string();
        if rendered.contains('\n') {
            out.push(Violation::new(path, "action text must be a single line"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse action `{input}`: {reason}")]
pub struct ActionParseError {
    pub input: String,
    pub reason: String,
}

fn fail(input: &str, reason: impl Into<String>) -> ActionParseError {
    ActionParseError {
        input: input.to_string(),
        reason: reason.into(),
    }
}

/// Parses one action in the textual grammar.
pub fn parse_action(input: &str) -> Result<PageAction, ActionParseError> {
    let mut line = input.trim();
    if line.contains('\n') {
        return Err(fail(input, "action must be a single line"));
    }
    if line.len() >= 2 && line.starts_with('`') && line.ends_with('`') {
        line = line.trim_matches('`').trim();
    }
    let keyword_end = line
        .find(|c: char| !(c.is_ascii_alphabetic() || c == '_'))
        .unwrap_or(line.len());
    let keyword = line[..keyword_end].to_ascii_lowercase();
    let rest = line[keyword_end..].trim_start();

    match keyword.as_str() {
        "click" => {
            let (id, tail) = leading_id(input, rest)?;
            if !tail.trim().is_empty() {
                return Err(fail(input, "unexpected text after element id"));
            }
            Ok(PageAction::Click { id })
        }
        "type" => {
            let (id, tail) = leading_id(input, rest)?;
            let text = bracketed_tail(input, tail)?;
            if text.is_empty() {
                return Err(fail(input, "type requires text"));
            }
            Ok(PageAction::Type {
                id,
                text: text.to_string(),
            })
        }
        "scroll" => {
            let arg = bracketed_tail(input, rest)?.trim().to_ascii_lowercase();
            let arg = arg.strip_prefix("direction=").unwrap_or(&arg);
            match arg.trim() {
                "up" => Ok(PageAction::Scroll(ScrollDirection::Up)),
                "down" => Ok(PageAction::Scroll(ScrollDirection::Down)),
                other => Err(fail(input, format!("unknown scroll direction `{other}`"))),
            }
        }
        "goto" => {
            let url = bracketed_tail(input, rest)?;
            if url.trim().is_empty() {
                return Err(fail(input, "goto requires a url"));
            }
            Ok(PageAction::Goto {
                url: url.to_string(),
            })
        }
        "go_back" => {
            if rest.is_empty() || rest == "[]" {
                Ok(PageAction::GoBack)
            } else {
                Err(fail(input, "go_back takes no argument"))
            }
        }
        "stop" => {
            let answer = bracketed_tail(input, rest)?;
            Ok(PageAction::Stop {
                answer: answer.to_string(),
            })
        }
        "" => Err(fail(input, "missing action keyword")),
        other => Err(fail(input, format!("unknown action `{other}`"))),
    }
}

/// Reads `[digits]` and returns the id plus the remaining text.
fn leading_id<'a>(input: &str, rest: &'a str) -> Result<(u32, &'a str), ActionParseError> {
    let inner = rest
        .strip_prefix('[')
        .ok_or_else(|| fail(input, "expected `[id]`"))?;
    let close = inner
        .find(']')
        .ok_or_else(|| fail(input, "unterminated `[id]`"))?;
    let digits = inner[..close].trim();
    let id = digits
        .parse::<u32>()
        .map_err(|_| fail(input, format!("element id `{digits}` is not a number")))?;
    Ok((id, &inner[close + 1..]))
}

/// Reads a trailing `[...]` argument spanning to the last `]` of the line.
fn bracketed_tail<'a>(input: &str, rest: &'a str) -> Result<&'a str, ActionParseError> {
    let rest = rest.trim();
    let inner = rest
        .strip_prefix('[')
        .ok_or_else(|| fail(input, "expected a bracketed argument"))?;
    inner
        .strip_suffix(']')
        .ok_or_else(|| fail(input, "unterminated bracketed argument"))
}

/// The local agent's ordered action plan for one phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub actions: Vec<PageAction>,
}

impl ActionSequence {
    pub fn new(actions: Vec<PageAction>) -> Self {
        Self { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Drops everything after the first stop.
    pub fn truncated_at_stop(mut self) -> Self {
        if let Some(pos) = self.actions.iter().position(PageAction::is_stop) {
            self.actions.truncate(pos + 1);
        }
        self
    }
}

impl Validate for ActionSequence {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.actions.is_empty() {
            out.push(Violation::new(join(path, "actions"), "must be nonempty"));
        }
        for (i, action) in self.actions.iter().enumerate() {
            action.check(&join(path, &format!("actions[{i}]")), out);
        }
        if let Some(pos) = self.actions.iter().position(PageAction::is_stop) {
            if pos + 1 < self.actions.len() {
                out.push(Violation::new(
                    join(path, &format!("actions[{}]", pos + 1)),
                    "no action after stop",
                ));
            }
        }
    }
}
