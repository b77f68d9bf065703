//! Messages, states and configuration shared by both agents, the
//! orchestrator and the harness.
//!
//! Everything here is an immutable value type: `Clone + Send + Sync`,
//! serde-encodable, and checkable through [`Validate`].

mod action;
mod plan;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use action::{parse_action, ActionParseError, ActionSequence, PageAction, ScrollDirection};
pub use plan::{parse_global_plan, render_plan_text, GlobalPlan, PhaseSpec, PlanParseError};
pub use validate::{describe, Validate, ValidationResult, Violation};

use crate::env::Evaluator;
use validate::{join, require_nonempty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    #[default]
    Unlabeled,
}

impl Difficulty {
    pub const LABELED: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
            Difficulty::Unlabeled => "Unlabeled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub objective: String,
    /// Fixture id, resolved by the harness.
    pub env_fixture: String,
    pub evaluator: Evaluator,
    #[serde(default)]
    pub difficulty: Difficulty,
    pub site_category: String,
    /// Finer task family label, e.g. "Product Information Retrieval".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcategory: Option<String>,
}

impl Validate for Task {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        require_nonempty(path, "id", &self.id, out);
        require_nonempty(path, "objective", &self.objective, out);
        require_nonempty(path, "env_fixture", &self.env_fixture, out);
        require_nonempty(path, "site_category", &self.site_category, out);
        self.evaluator.check(&join(path, "evaluator"), out);
    }
}

/// Task ids must be unique within a suite.
pub fn check_unique_ids<'a>(tasks: impl IntoIterator<Item = &'a Task>) -> ValidationResult {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, task) in tasks.into_iter().enumerate() {
        task.check(&format!("tasks[{i}]"), &mut out);
        if !seen.insert(task.id.as_str()) {
            out.push(Violation::new(
                format!("tasks[{i}].id"),
                format!("duplicate task id `{}`", task.id),
            ));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

pub const NO_PREVIOUS_ACTION: &str = "None";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub axtree: String,
    pub url: String,
    pub open_tabs: Vec<String>,
    /// Canonical text of the last applied action, or `"None"`.
    pub previous_action: String,
}

impl Validate for Observation {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        require_nonempty(path, "axtree", &self.axtree, out);
        require_nonempty(path, "url", &self.url, out);
        require_nonempty(path, "previous_action", &self.previous_action, out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepOutcome {
    Ok,
    EnvError { message: String },
}

impl StepOutcome {
    pub fn is_error(&self) -> bool {
        matches!(self, StepOutcome::EnvError { .. })
    }
}

impl fmt::Display for StepOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepOutcome::Ok => f.write_str("ok"),
            StepOutcome::EnvError { message } => write!(f, "error: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutedStep {
    pub action: PageAction,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub phase_index: u32,
    pub steps: Vec<ExecutedStep>,
    pub final_observation: Observation,
    pub raised_exception: bool,
}

impl ExecutionReport {
    pub fn new(phase_index: u32, steps: Vec<ExecutedStep>, final_observation: Observation) -> Self {
        let raised_exception = steps.iter().any(|s| s.outcome.is_error());
        Self {
            phase_index,
            steps,
            final_observation,
            raised_exception,
        }
    }

    /// Answer carried by a successfully applied stop, if any.
    pub fn stop_answer(&self) -> Option<&str> {
        self.steps.iter().find_map(|s| match (&s.action, &s.outcome) {
            (PageAction::Stop { answer }, StepOutcome::Ok) => Some(answer.as_str()),
            _ => None,
        })
    }

    /// Step-by-step feedback as shown to the agents.
    pub fn render_feedback(&self) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Step {}: {} -> {}", i + 1, s.action, s.outcome))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl Validate for ExecutionReport {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.steps.is_empty() {
            out.push(Violation::new(join(path, "steps"), "must be nonempty"));
        }
        let any_error = self.steps.iter().any(|s| s.outcome.is_error());
        if any_error != self.raised_exception {
            out.push(Violation::new(
                join(path, "raised_exception"),
                "must be true iff some step failed",
            ));
        }
        self.final_observation
            .check(&join(path, "final_observation"), out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictDecision {
    Move,
    Revise,
    Request,
}

impl VerdictDecision {
    pub fn token(self) -> &'static str {
        match self {
            VerdictDecision::Move => "move",
            VerdictDecision::Revise => "revise",
            VerdictDecision::Request => "request",
        }
    }
}

impl fmt::Display for VerdictDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalVerdict {
    pub decision: VerdictDecision,
    pub reasons: String,
}

impl Validate for LocalVerdict {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.decision != VerdictDecision::Move {
            require_nonempty(path, "reasons", &self.reasons, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplanRequest {
    pub phase_index: u32,
    pub reasons: String,
    pub report: ExecutionReport,
}

impl Validate for ReplanRequest {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        require_nonempty(path, "reasons", &self.reasons, out);
        self.report.check(&join(path, "report"), out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ruling", rename_all = "snake_case")]
pub enum GlobalDecision {
    Revise { new_plan: GlobalPlan },
    Overrule { guidance: String },
}

impl Validate for GlobalDecision {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        match self {
            GlobalDecision::Revise { new_plan } => new_plan.check(&join(path, "new_plan"), out),
            GlobalDecision::Overrule { guidance } => require_nonempty(path, "guidance", guidance, out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// Total LLM calls per task, enforced when `force_stop_enabled`.
    pub max_exchanges: u32,
    pub max_local_revisions_per_phase: u32,
    pub max_replan_requests_per_task: u32,
    pub force_stop_enabled: bool,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            max_exchanges: 30,
            max_local_revisions_per_phase: 3,
            max_replan_requests_per_task: 3,
            force_stop_enabled: true,
        }
    }
}

impl Validate for Budgets {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.force_stop_enabled && self.max_exchanges == 0 {
            out.push(Violation::new(
                join(path, "max_exchanges"),
                "must be positive when force stop is enabled",
            ));
        }
    }
}
