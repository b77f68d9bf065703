//! Local execution agent: turns one phase into page actions, runs them,
//! and judges the outcome.

use std::sync::{Arc, LazyLock};

use regex::Regex;
use thiserror::Error;

use crate::env::WebEnv;
use crate::llm::{ask_parsed, AskError, ChatRequest, Exchange, LlmError, SamplingSettings};
use crate::planner::repair_text;
use crate::prompts::{PromptError, PromptSet, Vars};
use crate::protocol::{
    parse_action, ActionParseError, ActionSequence, ExecutedStep, ExecutionReport, LocalVerdict, Observation,
    PhaseSpec, StepOutcome, VerdictDecision,
};
use crate::transcript::AgentRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutorAction {
    LocalPlan,
    PassCheck,
    FalseCheck,
    Revise,
    Overruled,
}

impl ExecutorAction {
    pub fn name(self) -> &'static str {
        match self {
            ExecutorAction::LocalPlan => "local_plan",
            ExecutorAction::PassCheck => "pass_check",
            ExecutorAction::FalseCheck => "false_check",
            ExecutorAction::Revise => "local_revise",
            ExecutorAction::Overruled => "overruled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionPlanError {
    #[error("no `**Action k:**` lines in response")]
    EmptyPlan,
    #[error(transparent)]
    Action(#[from] ActionParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unreadable verdict: {reason}")]
pub struct VerdictParseError {
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecutorError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("unparseable action plan: {0}")]
    ActionPlan(#[from] ActionPlanError),
    #[error(transparent)]
    Verdict(#[from] VerdictParseError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl<E: Into<ExecutorError>> From<AskError<E>> for ExecutorError {
    fn from(e: AskError<E>) -> Self {
        match e {
            AskError::Llm(e) => ExecutorError::Llm(e),
            AskError::Parse(e) => e.into(),
        }
    }
}

/// All attempts at one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRun {
    pub phase: PhaseSpec,
    pub attempts: Vec<(ActionSequence, ExecutionReport, LocalVerdict)>,
}

impl PhaseRun {
    pub fn new(phase: PhaseSpec) -> Self {
        Self {
            phase,
            attempts: Vec::new(),
        }
    }

    pub fn revision_count(&self) -> usize {
        self.attempts.len().saturating_sub(1)
    }
}

static ACTION_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(?:[-*]\s+)?\**\s*action\s+(\d+)\s*\**\s*:\s*\**\s*(.*?)\s*$").unwrap());
static VERDICT_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[\s*_#>-]*action[\s*_]*:[\s*_]*(.*?)\s*$").unwrap());
static FENCED_VERDICT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)```\s*(move|revise|request)\s*```").unwrap());
static REASONS_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?im)^[\s*_#>-]*reasons?[\s*_]*:[\s*_]*").unwrap());

/// Parses `**Action k:** <action>` lines into a sequence ending at the
/// first stop.
pub fn parse_action_plan(text: &str) -> Result<ActionSequence, ActionPlanError> {
    let mut actions = Vec::new();
    for line in text.lines() {
        let Some(caps) = ACTION_LINE.captures(line) else {
            continue;
        };
        let body = caps[2].trim().trim_end_matches("**").trim();
        let action = match parse_action(body) {
            Ok(a) => a,
            // `[click [3]]`, copying the placeholder brackets of the template
            Err(e) => match body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                Some(inner) => parse_action(inner).map_err(|_| e)?,
                None => return Err(e.into()),
            },
        };
        actions.push(action);
    }
    if actions.is_empty() {
        return Err(ActionPlanError::EmptyPlan);
    }
    Ok(ActionSequence::new(actions).truncated_at_stop())
}

fn verdict_token(raw: &str) -> String {
    raw.trim_matches(|c: char| c == '`' || c == '[' || c == ']' || c == '*' || c == '_' || c == '.' || c.is_whitespace())
        .to_lowercase()
}

/// Reads `Action: <token>` / `Reasons: <text>`; a fenced token such as
/// ```move``` is also accepted. Whichever appears first wins.
pub fn parse_verdict(text: &str, allow_move: bool) -> Result<LocalVerdict, VerdictParseError> {
    let labeled = VERDICT_LINE.captures(text).map(|c| (c.get(0).unwrap().start(), verdict_token(&c[1])));
    let fenced = FENCED_VERDICT
        .captures(text)
        .map(|c| (c.get(0).unwrap().start(), c[1].to_lowercase()));
    let (_, token) = match (labeled, fenced) {
        (Some(l), Some(f)) => {
            if l.0 <= f.0 {
                l
            } else {
                f
            }
        }
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => {
            return Err(VerdictParseError {
                reason: "no `Action:` line or fenced decision".into(),
            })
        }
    };
    let decision = match token.as_str() {
        "move" => VerdictDecision::Move,
        "revise" => VerdictDecision::Revise,
        "request" => VerdictDecision::Request,
        other => {
            return Err(VerdictParseError {
                reason: format!("unknown decision `{other}`"),
            })
        }
    };
    if decision == VerdictDecision::Move && !allow_move {
        return Err(VerdictParseError {
            reason: "`move` is not allowed after an execution error".into(),
        });
    }
    let reasons = match REASONS_LINE.find(text) {
        Some(m) => text[m.end()..].trim().to_string(),
        None => VERDICT_LINE.replace(text, "").trim().to_string(),
    };
    if decision != VerdictDecision::Move && reasons.is_empty() {
        return Err(VerdictParseError {
            reason: format!("`{decision}` needs reasons"),
        });
    }
    Ok(LocalVerdict { decision, reasons })
}

#[derive(Debug, Clone)]
pub struct LocalExecutor {
    prompts: Arc<PromptSet>,
    sampling: SamplingSettings,
    task_objective: String,
}

impl LocalExecutor {
    pub fn new(prompts: Arc<PromptSet>, sampling: SamplingSettings, task_objective: impl Into<String>) -> Self {
        Self {
            prompts,
            sampling,
            task_objective: task_objective.into(),
        }
    }

    pub fn request(
        &self,
        action: ExecutorAction,
        phase: &PhaseSpec,
        obs: &Observation,
        reasons: Option<&str>,
        feedback: Option<&str>,
    ) -> Result<ChatRequest, ExecutorError> {
        let mut vars = Vars::from([
            ("task", self.task_objective.as_str()),
            ("expected_state", phase.expected_state.as_str()),
        ]);
        if let Some(r) = reasons {
            vars.insert("reasons", r);
        }
        if let Some(f) = feedback {
            vars.insert("feedback", f);
        }
        let meta = self.prompts.render(action.name(), &vars)?;
        let template = self.prompts.render(
            "template",
            &Vars::from([
                ("observation", obs.axtree.as_str()),
                ("url", obs.url.as_str()),
                ("objective", phase.subtask.as_str()),
                ("previous_action", obs.previous_action.as_str()),
            ]),
        )?;
        Ok(ChatRequest::new(
            self.prompts.get("local_intro")?,
            format!("{meta}\n\n{template}"),
            &self.sampling,
        ))
    }

    fn ask_actions(&self, exchange: &mut dyn Exchange, action: ExecutorAction, request: ChatRequest) -> Result<ActionSequence, ExecutorError> {
        let prompts = &self.prompts;
        Ok(ask_parsed(
            exchange,
            AgentRole::LocalExecutor,
            action.name(),
            request,
            parse_action_plan,
            || ActionPlanError::EmptyPlan,
            |e| repair_text(prompts, "repair_actions", &e.to_string(), None),
        )?)
    }

    pub fn plan_phase(&self, exchange: &mut dyn Exchange, phase: &PhaseSpec, obs: &Observation) -> Result<ActionSequence, ExecutorError> {
        let request = self.request(ExecutorAction::LocalPlan, phase, obs, None, None)?;
        self.ask_actions(exchange, ExecutorAction::LocalPlan, request)
    }

    /// Applies actions in order, stopping after the first error or after
    /// a stop.
    pub fn execute_actions(&self, seq: &ActionSequence, env: &mut WebEnv, phase_index: u32) -> ExecutionReport {
        let mut steps = Vec::new();
        for action in &seq.actions {
            let outcome = match env.apply(action) {
                Ok(_) => StepOutcome::Ok,
                Err(e) => StepOutcome::EnvError { message: e.to_string() },
            };
            let halt = outcome.is_error() || action.is_stop();
            steps.push(ExecutedStep {
                action: action.clone(),
                outcome,
            });
            if halt {
                break;
            }
        }
        ExecutionReport::new(phase_index, steps, env.observe())
    }

    fn ask_verdict(
        &self,
        exchange: &mut dyn Exchange,
        action: ExecutorAction,
        report: &ExecutionReport,
        phase: &PhaseSpec,
        obs: &Observation,
    ) -> Result<LocalVerdict, ExecutorError> {
        let allow_move = action == ExecutorAction::PassCheck;
        let feedback = report.render_feedback();
        let request = self.request(action, phase, obs, None, Some(&feedback))?;
        let prompts = &self.prompts;
        let allowed = if allow_move { "move|revise|request" } else { "revise|request" };
        Ok(ask_parsed(
            exchange,
            AgentRole::LocalExecutor,
            action.name(),
            request,
            |text| parse_verdict(text, allow_move),
            || VerdictParseError {
                reason: "empty response".into(),
            },
            |e| repair_text(prompts, "repair_verdict", &e.to_string(), Some(allowed)),
        )?)
    }

    pub fn check_pass(
        &self,
        exchange: &mut dyn Exchange,
        report: &ExecutionReport,
        phase: &PhaseSpec,
        obs: &Observation,
    ) -> Result<LocalVerdict, ExecutorError> {
        self.ask_verdict(exchange, ExecutorAction::PassCheck, report, phase, obs)
    }

    /// Like [`check_pass`](Self::check_pass) but `move` is rejected.
    pub fn check_fail(
        &self,
        exchange: &mut dyn Exchange,
        report: &ExecutionReport,
        phase: &PhaseSpec,
        obs: &Observation,
    ) -> Result<LocalVerdict, ExecutorError> {
        self.ask_verdict(exchange, ExecutorAction::FalseCheck, report, phase, obs)
    }

    pub fn revise_local(
        &self,
        exchange: &mut dyn Exchange,
        reasons: &str,
        phase: &PhaseSpec,
        obs: &Observation,
    ) -> Result<ActionSequence, ExecutorError> {
        let request = self.request(ExecutorAction::Revise, phase, obs, Some(reasons), None)?;
        self.ask_actions(exchange, ExecutorAction::Revise, request)
    }

    pub fn handle_overrule(
        &self,
        exchange: &mut dyn Exchange,
        guidance: &str,
        phase: &PhaseSpec,
        obs: &Observation,
    ) -> Result<ActionSequence, ExecutorError> {
        let request = self.request(ExecutorAction::Overruled, phase, obs, Some(guidance), None)?;
        self.ask_actions(exchange, ExecutorAction::Overruled, request)
    }
}
