//! Global plans and the line grammar the planner replies in.
//!
//! One phase per line:
//!
//! ```text
//! Phase 1: Open the Kitchen category | Expected: Kitchen products are listed
//! Phase 2: Sort by price ascending | Expected: Cheapest product shown first
//! ```
//!
//! The parser also accepts `1. <subtask> | Expected: <state>` lines, an
//! `Expected:` line directly under a phase line, and markdown bullets or
//! bold around the phase header. Phases are renumbered 1..N in order of
//! appearance.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::validate::{join, require_nonempty, Validate, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub index: u32,
    pub subtask: String,
    pub expected_state: String,
}

impl PhaseSpec {
    pub fn new(index: u32, subtask: impl Into<String>, expected_state: impl Into<String>) -> Self {
        Self {
            index,
            subtask: subtask.into(),
            expected_state: expected_state.into(),
        }
    }

    /// The phase as one grammar line.
    pub fn render(&self) -> String {
        format!(
            "Phase {}: {} | Expected: {}",
            self.index, self.subtask, self.expected_state
        )
    }
}

impl Validate for PhaseSpec {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.index == 0 {
            out.push(Violation::new(join(path, "index"), "phase index is 1-based"));
        }
        require_nonempty(path, "subtask", &self.subtask, out);
        require_nonempty(path, "expected_state", &self.expected_state, out);
        for (field, value) in [
            ("subtask", &self.subtask),
            ("expected_state", &self.expected_state),
        ] {
            if value.contains('\n') || value.contains('\r') {
                out.push(Violation::new(join(path, field), "must be a single line"));
            }
            if value.trim() != value {
                out.push(Violation::new(
                    join(path, field),
                    "must not have surrounding whitespace",
                ));
            }
        }
        if EXPECTED_MARKER.is_match(&self.subtask) {
            out.push(Violation::new(
                join(path, "subtask"),
                "must not contain the `| Expected:` separator",
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalPlan {
    pub phases: Vec<PhaseSpec>,
    pub plan_version: u32,
}

impl GlobalPlan {
    /// Builds a plan from `(subtask, expected_state)` pairs, numbering phases from 1.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, S)>, plan_version: u32) -> Self {
        let phases = pairs
            .into_iter()
            .zip(1u32..)
            .map(|((subtask, expected), index)| PhaseSpec::new(index, subtask, expected))
            .collect();
        Self {
            phases,
            plan_version,
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Phase by 1-based index.
    pub fn phase(&self, index: u32) -> Option<&PhaseSpec> {
        self.phases.iter().find(|p| p.index == index)
    }

    pub fn render(&self) -> String {
        render_plan_text(self)
    }
}

impl Validate for GlobalPlan {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.phases.is_empty() {
            out.push(Violation::new(join(path, "phases"), "at least one phase"));
        }
        if self.plan_version == 0 {
            out.push(Violation::new(
                join(path, "plan_version"),
                "plan_version starts at 1",
            ));
        }
        let contiguous = self
            .phases
            .iter()
            .zip(1u32..)
            .all(|(phase, expected)| phase.index == expected);
        if !contiguous {
            out.push(Violation::new(
                join(path, "phases"),
                "phase indices contiguous",
            ));
        }
        for (i, phase) in self.phases.iter().enumerate() {
            phase.check(&join(path, &format!("phases[{i}]")), out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanParseError {
    #[error("no parseable phases in response")]
    NoPhases,
    #[error("phase {0} has no expected state")]
    MissingExpected(u32),
    #[error("phase {0} has an empty subtask")]
    EmptySubtask(u32),
}

static EXPECTED_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\|\s*expected(?:\s+state)?\s*:").unwrap());
static PHASE_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:[-*>#]+\s+)?\**\s*phase\s*(\d+)\s*\**\s*[:.)-]\s*\**\s*(.*)$").unwrap()
});
static NUMBERED_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(\d+)[.)]\s+(.*)$").unwrap());
static EXPECTED_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:[-*>]+\s+)?\**\s*expected(?:\s+state)?\s*\**\s*:\s*\**\s*(.*)$").unwrap()
});

pub fn render_plan_text(plan: &GlobalPlan) -> String {
    plan.phases
        .iter()
        .map(PhaseSpec::render)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses planner output into a plan with the given version.
pub fn parse_global_plan(text: &str, plan_version: u32) -> Result<GlobalPlan, PlanParseError> {
    let has_phase_lines = text.lines().any(|l| PHASE_LINE.is_match(l));
    let header = if has_phase_lines {
        &*PHASE_LINE
    } else {
        &*NUMBERED_LINE
    };

    // (subtask, expected)
    let mut drafts: Vec<(String, Option<String>)> = Vec::new();
    for line in text.lines() {
        if let Some(caps) = header.captures(line) {
            let body = caps.get(2).map_or("", |m| m.as_str());
            let draft = match EXPECTED_MARKER.find(body) {
                Some(m) => (
                    clean(&body[..m.start()]),
                    Some(clean(&body[m.end()..])),
                ),
                None => (clean(body), None),
            };
            drafts.push(draft);
        } else if let Some(caps) = EXPECTED_LINE.captures(line) {
            if let Some(last) = drafts.last_mut() {
                if last.1.is_none() {
                    last.1 = Some(clean(&caps[1]));
                }
            }
        }
    }

    if drafts.is_empty() {
        return Err(PlanParseError::NoPhases);
    }
    let mut phases = Vec::with_capacity(drafts.len());
    for ((subtask, expected), index) in drafts.into_iter().zip(1u32..) {
        if subtask.is_empty() {
            return Err(PlanParseError::EmptySubtask(index));
        }
        let expected = match expected {
            Some(e) if !e.is_empty() => e,
            _ => return Err(PlanParseError::MissingExpected(index)),
        };
        phases.push(PhaseSpec::new(index, subtask, expected));
    }
    Ok(GlobalPlan {
        phases,
        plan_version,
    })
}

fn clean(s: &str) -> String {
    s.trim().trim_end_matches("**").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_canonical_two_phase_plan() {
        let text = "Phase 1: search for shoes | Expected: results listed\n\
                    Phase 2: sort by price | Expected: cheapest first";
        let plan = parse_global_plan(text, 1).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan.phases[0], PhaseSpec::new(1, "search for shoes", "results listed"));
        assert_eq!(plan.phases[1].expected_state, "cheapest first");
        assert!(plan.is_valid());
        assert_eq!(render_plan_text(&plan), text);
    }

    #[test]
    fn accepts_markdown_and_split_lines() {
        let text = "Here is my plan:\n\
                    - **Phase 1:** Open the Kitchen category\n\
                      Expected: kitchen products listed\n\
                    **Phase 2**: Read the price | Expected State: price known\n";
        let plan = parse_global_plan(text, 3).unwrap();
        assert_eq!(plan.plan_version, 3);
        assert_eq!(plan.phases[0].subtask, "Open the Kitchen category");
        assert_eq!(plan.phases[0].expected_state, "kitchen products listed");
        assert_eq!(plan.phases[1].subtask, "Read the price");
    }

    #[test]
    fn numbered_list_variant_renumbers() {
        let text = "3. find it | Expected: found\n7) report | Expected: reported";
        let plan = parse_global_plan(text, 1).unwrap();
        assert_eq!(
            plan.phases.iter().map(|p| p.index).collect::<Vec<_>>(),
            vec![1, 2]
        );
    }

    #[test]
    fn malformed_plans() {
        assert_eq!(parse_global_plan("I will do my best.", 1), Err(PlanParseError::NoPhases));
        assert_eq!(
            parse_global_plan("Phase 1: look around", 1),
            Err(PlanParseError::MissingExpected(1))
        );
        assert_eq!(
            parse_global_plan("Phase 1:  | Expected: x", 1),
            Err(PlanParseError::EmptySubtask(1))
        );
    }

    #[test]
    fn non_contiguous_indices_are_a_violation() {
        let plan = GlobalPlan {
            phases: vec![PhaseSpec::new(1, "a", "b"), PhaseSpec::new(3, "c", "d")],
            plan_version: 1,
        };
        let v = plan.validate().unwrap_err();
        assert!(v.iter().any(|v| v.message == "phase indices contiguous"));
    }

    #[test]
    fn well_formed_phase_is_ok() {
        assert_eq!(
            PhaseSpec::new(1, "search for shoes", "results listed").validate(),
            Ok(())
        );
    }

    #[test]
    fn empty_plan_is_a_violation() {
        let plan = GlobalPlan {
            phases: vec![],
            plan_version: 1,
        };
        assert!(plan.validate().is_err());
    }
}
