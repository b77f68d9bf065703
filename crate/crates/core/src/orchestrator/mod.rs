//! Runs one task: plan, execute each phase, escalate, collate, evaluate.
//!
//! [`run_task`] drives [`OrchestratorState::step`] with the results of
//! agent calls and environment actions. Every LLM call goes through a
//! budgeted exchange that refuses calls once the force-stop limit is hit.

mod budget;
mod state;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use budget::{enforce_budget, exchange_bound, BudgetCheck, Counters, Spend};
pub use state::{IllegalTransition, Input, Mode, OrchestratorState};

use crate::env::{evaluate, EnvConfig, FixtureLoadError, SiteFixture, WebEnv};
use crate::executor::{ExecutorError, LocalExecutor};
use crate::llm::{
    augment_with_search, ChatBackend, ChatRequest, Exchange, FixtureSearchProvider, LlmError, RetrievalProvider,
    RetrievedPassage, SamplingSettings,
};
use crate::planner::{GlobalPlanner, PlannerContext, PlannerError};
use crate::prompts::PromptSet;
use crate::protocol::{describe, Budgets, Observation, ReplanRequest, Task, Validate};
use crate::transcript::{AgentRole, Transcript, TranscriptEvent, TranscriptHeader};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    ForceStopped,
    BudgetExhausted,
    ProtocolError(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub success: bool,
    pub final_answer: String,
    pub termination: Termination,
    pub exchanges_used: u32,
    pub plan_versions: u32,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("fixture failed to load: {0}")]
    Fixture(#[from] FixtureLoadError),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("replay diverged at event {seq}")]
    Diverged { seq: u64 },
    #[error("cannot write transcript: {0}")]
    Transcript(#[from] std::io::Error),
    #[error("orchestrator bug: {0}")]
    Illegal(#[from] IllegalTransition),
}

#[derive(Clone)]
pub struct RunOptions {
    pub budgets: Budgets,
    pub sampling: SamplingSettings,
    pub env: EnvConfig,
    pub prompts: Arc<PromptSet>,
    pub augment_search: bool,
    /// Provider used when augmenting; the fixture's snippets when `None`.
    pub search: Option<Arc<dyn RetrievalProvider>>,
    /// Passages to use instead of querying a provider (replay).
    pub passages: Option<Vec<RetrievedPassage>>,
    /// Number of local agents; only 1 is supported.
    pub local_agents: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            budgets: Budgets::default(),
            sampling: SamplingSettings::default(),
            env: EnvConfig::default(),
            prompts: Arc::new(PromptSet::bundled()),
            augment_search: false,
            search: None,
            passages: None,
            local_agents: 1,
        }
    }
}

impl std::fmt::Debug for RunOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunOptions")
            .field("budgets", &self.budgets)
            .field("sampling", &self.sampling)
            .field("env", &self.env)
            .field("augment_search", &self.augment_search)
            .field("local_agents", &self.local_agents)
            .finish_non_exhaustive()
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub outcome: TaskOutcome,
    pub header: TranscriptHeader,
    pub events: Vec<TranscriptEvent>,
}

/// The [`Exchange`] agents use inside a run: checks the force-stop budget
/// before each call and records each completed call in the transcript.
struct Budgeted<'a> {
    state: &'a mut OrchestratorState,
    backend: &'a dyn ChatBackend,
}

impl Exchange for Budgeted<'_> {
    fn complete(&mut self, role: AgentRole, action: &str, request: ChatRequest) -> Result<String, LlmError> {
        if enforce_budget(&self.state.counters, &self.state.budgets, Spend::Exchange) == BudgetCheck::ForceStopNow {
            return Err(LlmError::ForceStop {
                exchanges: self.state.counters.exchanges,
            });
        }
        let state = &mut *self.state;
        crate::llm::complete(self.backend, role, action, &request, &mut |call| state.record_call(call))
    }
}

enum AgentFailure {
    Llm(LlmError),
    Other(String),
}

impl From<PlannerError> for AgentFailure {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::Llm(e) => AgentFailure::Llm(e),
            other => AgentFailure::Other(other.to_string()),
        }
    }
}

impl From<ExecutorError> for AgentFailure {
    fn from(e: ExecutorError) -> Self {
        match e {
            ExecutorError::Llm(e) => AgentFailure::Llm(e),
            other => AgentFailure::Other(other.to_string()),
        }
    }
}

/// Maps an agent failure to the state machine input it causes.
fn failure_input(failure: impl Into<AgentFailure>) -> Result<Input, RunError> {
    match failure.into() {
        AgentFailure::Llm(LlmError::ForceStop { .. }) => Ok(Input::ForceStop),
        AgentFailure::Llm(LlmError::ReplayDivergence { seq }) => Err(RunError::Diverged { seq }),
        AgentFailure::Llm(e) => Ok(Input::ProtocolFailure(e.to_string())),
        AgentFailure::Other(detail) => Ok(Input::ProtocolFailure(detail)),
    }
}

fn retrieve_passages(task: &Task, fixture: &SiteFixture, options: &RunOptions) -> Vec<RetrievedPassage> {
    if let Some(passages) = &options.passages {
        return passages.clone();
    }
    if !options.augment_search {
        return Vec::new();
    }
    let fallback;
    let provider: &dyn RetrievalProvider = match &options.search {
        Some(p) => p.as_ref(),
        None => {
            fallback = FixtureSearchProvider::new(fixture.search_snippets.clone());
            &fallback
        }
    };
    match augment_with_search(&task.objective, provider) {
        Ok(passages) => passages,
        Err(e) => {
            log::warn!("task {}: search augmentation skipped: {e}", task.id);
            Vec::new()
        }
    }
}

/// Runs `task` to completion against `fixture`.
///
/// The environment is loaded before any LLM call. With `sink`, the
/// transcript is streamed there line by line as the run progresses.
pub fn run_task(
    task: &Task,
    fixture: Arc<SiteFixture>,
    backend: &dyn ChatBackend,
    options: &RunOptions,
    sink: Option<Box<dyn Write + Send>>,
) -> Result<RunResult, RunError> {
    if options.local_agents != 1 {
        return Err(RunError::Config(format!(
            "{} local agents requested; only 1 is supported",
            options.local_agents
        )));
    }
    options
        .budgets
        .validate()
        .map_err(|v| RunError::Config(describe(&v)))?;
    task.validate().map_err(|v| RunError::Config(describe(&v)))?;

    let (mut env, initial) = WebEnv::reset(fixture.clone(), options.env)?;
    let passages = retrieve_passages(task, &fixture, options);
    let header = TranscriptHeader::new(
        task.clone(),
        options.budgets,
        options.sampling.temperature,
        passages.clone(),
        backend.id(),
    );
    let header = TranscriptHeader {
        augment_search: options.augment_search,
        ..header
    };
    let transcript = match sink {
        Some(out) => Transcript::streaming(&header, out)?,
        None => Transcript::new(),
    };

    let planner = GlobalPlanner::new(options.prompts.clone(), options.sampling);
    let executor = LocalExecutor::new(options.prompts.clone(), options.sampling, task.objective.clone());
    let mut state = OrchestratorState::new(options.budgets, transcript);
    let base_ctx = PlannerContext {
        task: task.clone(),
        observation: initial.clone(),
        previous_plan: None,
        passages,
    };

    while !state.is_done() {
        let observation: Observation = state
            .last_report
            .as_ref()
            .map_or_else(|| initial.clone(), |r| r.final_observation.clone());
        let input = match state.mode {
            Mode::Planning => {
                let mut ex = Budgeted {
                    state: &mut state,
                    backend,
                };
                match planner.make_global_plan(&mut ex, &base_ctx) {
                    Ok(plan) => Input::PlanReady(plan),
                    Err(e) => failure_input(e)?,
                }
            }
            Mode::PhaseExecution(k) => {
                let phase = state.plan.as_ref().and_then(|p| p.phase(k)).cloned().expect("phase in plan");
                let guidance = state.pending_guidance.clone();
                let mut ex = Budgeted {
                    state: &mut state,
                    backend,
                };
                let actions = match guidance {
                    Some(g) => executor.handle_overrule(&mut ex, &g, &phase, &observation),
                    None => executor.plan_phase(&mut ex, &phase, &observation),
                };
                match actions {
                    Ok(seq) => Input::ActionsExecuted(executor.execute_actions(&seq, &mut env, k)),
                    Err(e) => failure_input(e)?,
                }
            }
            Mode::LocalRevision => {
                let k = state.phase;
                let phase = state.plan.as_ref().and_then(|p| p.phase(k)).cloned().expect("phase in plan");
                let reasons = state.last_verdict.as_ref().map(|v| v.reasons.clone()).unwrap_or_default();
                let mut ex = Budgeted {
                    state: &mut state,
                    backend,
                };
                match executor.revise_local(&mut ex, &reasons, &phase, &observation) {
                    Ok(seq) => Input::ActionsExecuted(executor.execute_actions(&seq, &mut env, k)),
                    Err(e) => failure_input(e)?,
                }
            }
            Mode::PassCheck | Mode::FailCheck => {
                let k = state.phase;
                let phase = state.plan.as_ref().and_then(|p| p.phase(k)).cloned().expect("phase in plan");
                let report = state.last_report.clone().expect("report before check");
                let failed = state.mode == Mode::FailCheck;
                let mut ex = Budgeted {
                    state: &mut state,
                    backend,
                };
                let verdict = if failed {
                    executor.check_fail(&mut ex, &report, &phase, &report.final_observation)
                } else {
                    executor.check_pass(&mut ex, &report, &phase, &report.final_observation)
                };
                match verdict {
                    Ok(v) => Input::Verdict(v),
                    Err(e) => failure_input(e)?,
                }
            }
            Mode::ReplanPending => {
                let report = state.last_report.clone().expect("report before request");
                let reasons = state.last_verdict.as_ref().map(|v| v.reasons.clone()).unwrap_or_default();
                Input::ReplanSubmitted(ReplanRequest {
                    phase_index: state.phase,
                    reasons,
                    report,
                })
            }
            Mode::AwaitingDecision => {
                let request = state.pending_request.clone().expect("pending request");
                let plan = state.plan.clone().expect("live plan");
                let ctx = PlannerContext {
                    observation: observation.clone(),
                    ..base_ctx.clone()
                };
                let mut ex = Budgeted {
                    state: &mut state,
                    backend,
                };
                match planner.decide_replan(&mut ex, &request, &plan, &ctx) {
                    Ok(decision) => Input::Decision(decision),
                    Err(e) => failure_input(e)?,
                }
            }
            Mode::Collation => {
                let plan = state.plan.clone().expect("live plan");
                let report = state.last_report.clone();
                let stop = state.stop_answer.clone();
                let ctx = PlannerContext {
                    observation: observation.clone(),
                    ..base_ctx.clone()
                };
                let mut ex = Budgeted {
                    state: &mut state,
                    backend,
                };
                match planner.collate(&mut ex, report.as_ref(), &plan, &ctx, stop.as_deref()) {
                    Ok(answer) => Input::Finished {
                        success: evaluate(&task.evaluator, &answer, env.url()),
                        answer,
                    },
                    Err(e) => failure_input(e)?,
                }
            }
            Mode::ForceStopped => {
                let answer = GlobalPlanner::collate_offline(state.stop_answer.as_deref());
                Input::Finished {
                    success: evaluate(&task.evaluator, &answer, env.url()),
                    answer,
                }
            }
            Mode::Done => unreachable!("loop exits on Done"),
        };
        state.step(input)?;
    }

    if let Some(err) = state.transcript.take_stream_error() {
        log::warn!("task {}: transcript incomplete on disk: {err}", task.id);
    }
    let (success, final_answer, termination) = match state.transcript.events().last().map(|e| &e.kind) {
        Some(crate::transcript::EventKind::TaskResult {
            success,
            answer,
            termination,
        }) => (*success, answer.clone(), termination.clone()),
        _ => unreachable!("Done is only reached through a task result"),
    };
    let outcome = TaskOutcome {
        task_id: task.id.clone(),
        success,
        final_answer,
        termination,
        exchanges_used: state.counters.exchanges,
        plan_versions: state.plan_versions,
    };
    Ok(RunResult {
        outcome,
        header,
        events: state.transcript.into_events(),
    })
}
