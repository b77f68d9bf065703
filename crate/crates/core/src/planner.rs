//! Global planning agent: plan, rule on replan requests, revise, collate.

use std::sync::{Arc, LazyLock};

use regex::Regex;
use thiserror::Error;

use crate::llm::{ask_parsed, AskError, ChatRequest, Exchange, LlmError, RetrievedPassage, SamplingSettings};
use crate::prompts::{PromptError, PromptSet, Vars};
use crate::protocol::{
    parse_global_plan, ExecutionReport, GlobalDecision, GlobalPlan, Observation, PlanParseError, ReplanRequest, Task,
};
use crate::transcript::AgentRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerAction {
    GlobalPlan,
    Decide,
    Revise,
    Overrule,
    Collation,
}

impl PlannerAction {
    pub fn name(self) -> &'static str {
        match self {
            PlannerAction::GlobalPlan => "global_plan",
            PlannerAction::Decide => "decide",
            PlannerAction::Revise => "revise",
            PlannerAction::Overrule => "overrule",
            PlannerAction::Collation => "collation",
        }
    }

    fn uses_passages(self) -> bool {
        matches!(self, PlannerAction::GlobalPlan | PlannerAction::Revise)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerContext {
    pub task: Task,
    pub observation: Observation,
    pub previous_plan: Option<GlobalPlan>,
    pub passages: Vec<RetrievedPassage>,
}

/// Action-specific prompt inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlannerExtras {
    pub reasons: Option<String>,
    pub feedback: Option<String>,
    pub phase_index: Option<u32>,
    pub stop_answer: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ruling {
    Revise,
    Overrule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionReply {
    pub ruling: Ruling,
    /// Text after a `Guidance:` label, or the reply minus the ruling token.
    pub guidance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no revise/overrule ruling in response: {excerpt:?}")]
pub struct DecisionParseError {
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("unparseable plan: {0}")]
    PlanParse(#[from] PlanParseError),
    #[error("unparseable decision: {0}")]
    DecisionParse(#[from] DecisionParseError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl<E: Into<PlannerError>> From<AskError<E>> for PlannerError {
    fn from(e: AskError<E>) -> Self {
        match e {
            AskError::Llm(e) => PlannerError::Llm(e),
            AskError::Parse(e) => e.into(),
        }
    }
}

static FENCED_RULING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)```\s*(revise|overrule)\s*```").unwrap());
static BARE_RULING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[\s*_#>`-]*(?:(?:decision|action|next action|ruling)[\s*_]*:[\s*_`]*)?(revise|overrule)[\s*_`.!]*$")
        .unwrap()
});
static GUIDANCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?im)^[\s*_#>-]*guidance[\s*_]*:[\s*_]*").unwrap());
static FINAL_ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[\s*_#>-]*final answer[\s*_]*:[\s*_]*(.*?)[\s*_]*$").unwrap());

fn excerpt(text: &str) -> String {
    text.chars().take(80).collect()
}

/// Reads a revise/overrule ruling: the first line holding a fenced token
/// or consisting of the bare token (optionally labeled) wins.
pub fn parse_decision(text: &str) -> Result<DecisionReply, DecisionParseError> {
    let mut found = None;
    for (i, line) in text.lines().enumerate() {
        let token = FENCED_RULING
            .captures(line)
            .or_else(|| BARE_RULING.captures(line))
            .map(|c| c[1].to_lowercase());
        if let Some(token) = token {
            found = Some((i, token));
            break;
        }
    }
    let Some((line_no, token)) = found else {
        return Err(DecisionParseError { excerpt: excerpt(text) });
    };
    let ruling = if token == "revise" {
        Ruling::Revise
    } else {
        Ruling::Overrule
    };
    let guidance = match GUIDANCE.find(text) {
        Some(m) => text[m.end()..].trim().to_string(),
        None => text
            .lines()
            .enumerate()
            .filter(|(i, _)| *i != line_no)
            .map(|(_, l)| l)
            .collect::<Vec<_>>()
            .join("\n")
            .trim()
            .to_string(),
    };
    Ok(DecisionReply { ruling, guidance })
}

/// The last `Final answer:` line, or the whole reply when there is none.
pub fn extract_final_answer(text: &str) -> String {
    match FINAL_ANSWER.captures_iter(text).last() {
        Some(caps) => caps[1].trim().to_string(),
        None => text.trim().to_string(),
    }
}

fn render_passages(passages: &[RetrievedPassage]) -> String {
    let mut out = String::from("RETRIEVED INFORMATION:");
    for (i, p) in passages.iter().enumerate() {
        out.push_str(&format!("\n[{}] {} (source: {})", i + 1, p.passage.trim(), p.source));
    }
    out
}

#[derive(Debug, Clone)]
pub struct GlobalPlanner {
    prompts: Arc<PromptSet>,
    sampling: SamplingSettings,
}

impl GlobalPlanner {
    pub fn new(prompts: Arc<PromptSet>, sampling: SamplingSettings) -> Self {
        Self { prompts, sampling }
    }

    /// Builds the chat request for `action`: the role introduction as the
    /// system prompt, then the action prompt, passages when applicable, and
    /// the observation block.
    pub fn request(
        &self,
        action: PlannerAction,
        ctx: &PlannerContext,
        extras: &PlannerExtras,
    ) -> Result<ChatRequest, PlannerError> {
        let plan_text = ctx.previous_plan.as_ref().map(GlobalPlan::render);
        let phase_index = extras.phase_index.map(|k| k.to_string());
        let mut vars = Vars::new();
        let optional = [
            ("plan", plan_text.as_deref()),
            ("reasons", extras.reasons.as_deref()),
            ("feedback", extras.feedback.as_deref()),
            ("phase_index", phase_index.as_deref()),
            ("stop_answer", extras.stop_answer.as_deref()),
        ];
        for (name, value) in optional {
            if let Some(v) = value {
                vars.insert(name, v);
            }
        }
        let meta = self.prompts.render(action.name(), &vars)?;

        let obs = &ctx.observation;
        let template = self.prompts.render(
            "template",
            &Vars::from([
                ("observation", obs.axtree.as_str()),
                ("url", obs.url.as_str()),
                ("objective", ctx.task.objective.as_str()),
                ("previous_action", obs.previous_action.as_str()),
            ]),
        )?;

        let mut user = meta;
        if action.uses_passages() && !ctx.passages.is_empty() {
            user.push_str("\n\n");
            user.push_str(&render_passages(&ctx.passages));
        }
        user.push_str("\n\n");
        user.push_str(&template);
        Ok(ChatRequest::new(self.prompts.get("global_intro")?, user, &self.sampling))
    }

    pub fn render_planner_prompt(
        &self,
        action: PlannerAction,
        ctx: &PlannerContext,
        extras: &PlannerExtras,
    ) -> Result<String, PlannerError> {
        Ok(self.request(action, ctx, extras)?.rendered_prompt())
    }

    fn ask_plan(
        &self,
        exchange: &mut dyn Exchange,
        action: PlannerAction,
        request: ChatRequest,
        version: u32,
    ) -> Result<GlobalPlan, PlannerError> {
        let prompts = &self.prompts;
        let plan = ask_parsed(
            exchange,
            AgentRole::GlobalPlanner,
            action.name(),
            request,
            |text| parse_global_plan(text, version),
            || PlanParseError::NoPhases,
            |e| repair_text(prompts, "repair_plan", &e.to_string(), None),
        )?;
        Ok(plan)
    }

    pub fn make_global_plan(&self, exchange: &mut dyn Exchange, ctx: &PlannerContext) -> Result<GlobalPlan, PlannerError> {
        let request = self.request(PlannerAction::GlobalPlan, ctx, &PlannerExtras::default())?;
        self.ask_plan(exchange, PlannerAction::GlobalPlan, request, 1)
    }

    fn replan_extras(request: &ReplanRequest) -> PlannerExtras {
        PlannerExtras {
            reasons: Some(request.reasons.clone()),
            feedback: Some(request.report.render_feedback()),
            phase_index: Some(request.phase_index),
            stop_answer: None,
        }
    }

    /// One `decide` call returning the parsed ruling.
    pub fn decide(
        &self,
        exchange: &mut dyn Exchange,
        request: &ReplanRequest,
        current_plan: &GlobalPlan,
        ctx: &PlannerContext,
    ) -> Result<DecisionReply, PlannerError> {
        let ctx = with_plan(ctx, current_plan);
        let chat = self.request(PlannerAction::Decide, &ctx, &Self::replan_extras(request))?;
        let prompts = &self.prompts;
        let reply = ask_parsed(
            exchange,
            AgentRole::GlobalPlanner,
            PlannerAction::Decide.name(),
            chat,
            parse_decision,
            || DecisionParseError { excerpt: String::new() },
            |e| repair_text(prompts, "repair_decision", &e.to_string(), None),
        )?;
        Ok(reply)
    }

    /// Rules on a replan request: `decide`, then either `revise` for a new
    /// plan or, when the ruling came without guidance, `overrule` for it.
    pub fn decide_replan(
        &self,
        exchange: &mut dyn Exchange,
        request: &ReplanRequest,
        current_plan: &GlobalPlan,
        ctx: &PlannerContext,
    ) -> Result<GlobalDecision, PlannerError> {
        let reply = self.decide(exchange, request, current_plan, ctx)?;
        match reply.ruling {
            Ruling::Revise => Ok(GlobalDecision::Revise {
                new_plan: self.revise_plan(exchange, request, current_plan, ctx)?,
            }),
            Ruling::Overrule if !reply.guidance.is_empty() => Ok(GlobalDecision::Overrule {
                guidance: reply.guidance,
            }),
            Ruling::Overrule => Ok(GlobalDecision::Overrule {
                guidance: self.overrule_guidance(exchange, request, current_plan, ctx)?,
            }),
        }
    }

    pub fn revise_plan(
        &self,
        exchange: &mut dyn Exchange,
        request: &ReplanRequest,
        old_plan: &GlobalPlan,
        ctx: &PlannerContext,
    ) -> Result<GlobalPlan, PlannerError> {
        let ctx = with_plan(ctx, old_plan);
        let chat = self.request(PlannerAction::Revise, &ctx, &Self::replan_extras(request))?;
        self.ask_plan(exchange, PlannerAction::Revise, chat, old_plan.plan_version + 1)
    }

    pub fn overrule_guidance(
        &self,
        exchange: &mut dyn Exchange,
        request: &ReplanRequest,
        current_plan: &GlobalPlan,
        ctx: &PlannerContext,
    ) -> Result<String, PlannerError> {
        let ctx = with_plan(ctx, current_plan);
        let chat = self.request(PlannerAction::Overrule, &ctx, &Self::replan_extras(request))?;
        let text = exchange.complete(AgentRole::GlobalPlanner, PlannerAction::Overrule.name(), chat)?;
        Ok(match GUIDANCE.find(&text) {
            Some(m) => text[m.end()..].trim().to_string(),
            None => text.trim().to_string(),
        })
    }

    /// Produces the final answer. A blank reply, a reply without content,
    /// or a call refused by the exchange budget falls back to the local
    /// agent's stop answer.
    pub fn collate(
        &self,
        exchange: &mut dyn Exchange,
        final_report: Option<&ExecutionReport>,
        plan: &GlobalPlan,
        ctx: &PlannerContext,
        stop_answer: Option<&str>,
    ) -> Result<String, PlannerError> {
        let ctx = with_plan(ctx, plan);
        let extras = PlannerExtras {
            reasons: None,
            feedback: Some(
                final_report
                    .map(ExecutionReport::render_feedback)
                    .unwrap_or_else(|| "No actions were executed.".into()),
            ),
            phase_index: final_report.map(|r| r.phase_index),
            stop_answer: Some(stop_answer.unwrap_or("None").to_string()),
        };
        let chat = self.request(PlannerAction::Collation, &ctx, &extras)?;
        match exchange.complete(AgentRole::GlobalPlanner, PlannerAction::Collation.name(), chat) {
            Ok(text) => {
                let answer = extract_final_answer(&text);
                if answer.is_empty() {
                    Ok(Self::collate_offline(stop_answer))
                } else {
                    Ok(answer)
                }
            }
            Err(LlmError::ResponseEmpty | LlmError::ForceStop { .. }) => Ok(Self::collate_offline(stop_answer)),
            Err(e) => Err(e.into()),
        }
    }

    /// Collation without a model call: the stop answer, or empty.
    pub fn collate_offline(stop_answer: Option<&str>) -> String {
        stop_answer.unwrap_or_default().trim().to_string()
    }
}

fn with_plan(ctx: &PlannerContext, plan: &GlobalPlan) -> PlannerContext {
    PlannerContext {
        previous_plan: Some(plan.clone()),
        ..ctx.clone()
    }
}

pub(crate) fn repair_text(prompts: &PromptSet, key: &str, error: &str, allowed: Option<&str>) -> String {
    let mut vars = Vars::from([("error", error)]);
    if let Some(a) = allowed {
        vars.insert("allowed", a);
    }
    prompts
        .render(key, &vars)
        .unwrap_or_else(|_| format!("Your reply could not be parsed ({error}). Please follow the requested format."))
}
