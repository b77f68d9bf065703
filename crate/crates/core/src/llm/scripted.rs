//! Deterministic backend that answers from an ordered script.
//!
//! Script files are JSON:
//!
//! ```json
//! {
//!   "version": 1,
//!   "exchanges": [
//!     { "match": "multi-stage global plan", "response": "Phase 1: ... | Expected: ..." },
//!     { "pattern": "(?i)pass_check|verify the results", "response": "Action: move\nReasons: ok" },
//!     { "response": "matches any prompt" }
//!   ]
//! }
//! ```
//!
//! A suite script uses `"tasks": { "<task id>": [exchanges...] }` instead,
//! giving each task its own script.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, LlmError};
use crate::protocol::{Validate, Violation};

#[derive(Debug, Clone)]
pub enum PromptMatcher {
    Any,
    Substring(String),
    Pattern(Regex),
}

impl PromptMatcher {
    pub fn matches(&self, prompt: &str) -> bool {
        match self {
            PromptMatcher::Any => true,
            PromptMatcher::Substring(s) => prompt.contains(s.as_str()),
            PromptMatcher::Pattern(re) => re.is_match(prompt),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawExchange {
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    substring: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
    response: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawExchange", into = "RawExchange")]
pub struct ScriptedExchange {
    pub matcher: PromptMatcher,
    pub response: String,
}

impl ScriptedExchange {
    pub fn matching(substring: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: PromptMatcher::Substring(substring.into()),
            response: response.into(),
        }
    }

    pub fn any(response: impl Into<String>) -> Self {
        Self {
            matcher: PromptMatcher::Any,
            response: response.into(),
        }
    }
}

impl TryFrom<RawExchange> for ScriptedExchange {
    type Error = String;

    fn try_from(raw: RawExchange) -> Result<Self, Self::Error> {
        let matcher = match (raw.substring, raw.pattern) {
            (Some(_), Some(_)) => return Err("exchange has both `match` and `pattern`".into()),
            (Some(s), None) => PromptMatcher::Substring(s),
            (None, Some(p)) => PromptMatcher::Pattern(Regex::new(&p).map_err(|e| e.to_string())?),
            (None, None) => PromptMatcher::Any,
        };
        Ok(Self {
            matcher,
            response: raw.response,
        })
    }
}

impl From<ScriptedExchange> for RawExchange {
    fn from(ex: ScriptedExchange) -> Self {
        let (substring, pattern) = match ex.matcher {
            PromptMatcher::Any => (None, None),
            PromptMatcher::Substring(s) => (Some(s), None),
            PromptMatcher::Pattern(re) => (None, Some(re.as_str().to_string())),
        };
        RawExchange {
            substring,
            pattern,
            response: ex.response,
        }
    }
}

impl Validate for ScriptedExchange {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.response.is_empty() {
            out.push(Violation::new(format!("{path}.response"), "must be nonempty"));
        }
    }
}

/// On-disk script: a single exchange list, or one list per task id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptFile {
    #[serde(default = "one")]
    pub version: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exchanges: Vec<ScriptedExchange>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tasks: BTreeMap<String, Vec<ScriptedExchange>>,
}

fn one() -> u32 {
    1
}

impl ScriptFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let file: ScriptFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.version != 1 {
            return Err(format!("unsupported script version {}", file.version));
        }
        Ok(file)
    }

    /// The exchange list for `task_id`: its own entry, else the shared list.
    pub fn script_for(&self, task_id: &str) -> Option<&[ScriptedExchange]> {
        match self.tasks.get(task_id) {
            Some(list) => Some(list),
            None if !self.exchanges.is_empty() => Some(&self.exchanges),
            None => None,
        }
    }
}

/// Serves responses first-unconsumed-match in script order.
///
/// The cursor state is per instance; create one backend per task run.
#[derive(Debug)]
pub struct ScriptedBackend {
    exchanges: Vec<ScriptedExchange>,
    consumed: Mutex<Vec<bool>>,
    label: String,
}

impl ScriptedBackend {
    pub fn new(exchanges: Vec<ScriptedExchange>) -> Self {
        Self::labeled("scripted", exchanges)
    }

    pub fn labeled(label: impl Into<String>, exchanges: Vec<ScriptedExchange>) -> Self {
        let consumed = Mutex::new(vec![false; exchanges.len()]);
        Self {
            exchanges,
            consumed,
            label: label.into(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.consumed.lock().unwrap().iter().filter(|c| !**c).count()
    }
}

impl ChatBackend for ScriptedBackend {
    fn id(&self) -> String {
        self.label.clone()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let prompt = request.rendered_prompt();
        let mut consumed = self.consumed.lock().unwrap();
        if consumed.iter().all(|c| *c) {
            return Err(LlmError::BackendExhausted);
        }
        let hit = self
            .exchanges
            .iter()
            .enumerate()
            .find(|(i, ex)| !consumed[*i] && ex.matcher.matches(&prompt));
        match hit {
            Some((i, ex)) => {
                consumed[i] = true;
                Ok(ex.response.clone())
            }
            None => {
                let excerpt: String = prompt.chars().rev().take(160).collect::<Vec<_>>().into_iter().rev().collect();
                Err(LlmError::UnmatchedPrompt(excerpt))
            }
        }
    }
}
