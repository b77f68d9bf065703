//! The control loop as a transition function over [`OrchestratorState`].

use thiserror::Error;

use super::budget::{enforce_budget, BudgetCheck, Counters, Spend};
use super::Termination;
use crate::protocol::{
    Budgets, ExecutionReport, GlobalDecision, GlobalPlan, LocalVerdict, ReplanRequest, VerdictDecision,
};
use crate::transcript::{EventKind, LlmCall, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Planning,
    PhaseExecution(u32),
    PassCheck,
    FailCheck,
    LocalRevision,
    ReplanPending,
    AwaitingDecision,
    Collation,
    Done,
    ForceStopped,
}

/// Results fed back into the state machine by the driver.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    PlanReady(GlobalPlan),
    ActionsExecuted(ExecutionReport),
    Verdict(LocalVerdict),
    ReplanSubmitted(ReplanRequest),
    Decision(GlobalDecision),
    ForceStop,
    Finished { success: bool, answer: String },
    ProtocolFailure(String),
}

impl Input {
    pub fn name(&self) -> &'static str {
        match self {
            Input::PlanReady(_) => "plan_ready",
            Input::ActionsExecuted(_) => "actions_executed",
            Input::Verdict(_) => "verdict",
            Input::ReplanSubmitted(_) => "replan_submitted",
            Input::Decision(_) => "decision",
            Input::ForceStop => "force_stop",
            Input::Finished { .. } => "finished",
            Input::ProtocolFailure(_) => "protocol_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{input}` is not legal in mode {mode:?}: {detail}")]
pub struct IllegalTransition {
    pub mode: Mode,
    pub input: &'static str,
    pub detail: String,
}

#[derive(Debug)]
pub struct OrchestratorState {
    pub mode: Mode,
    pub budgets: Budgets,
    pub plan: Option<GlobalPlan>,
    pub counters: Counters,
    pub transcript: Transcript,
    /// Current phase index of the live plan, 0 before planning.
    pub phase: u32,
    pub last_report: Option<ExecutionReport>,
    pub last_verdict: Option<LocalVerdict>,
    pub pending_request: Option<ReplanRequest>,
    /// Overrule guidance awaiting the next phase attempt.
    pub pending_guidance: Option<String>,
    pub termination: Option<Termination>,
    pub stop_answer: Option<String>,
    pub plan_versions: u32,
}

impl OrchestratorState {
    pub fn new(budgets: Budgets, transcript: Transcript) -> Self {
        Self {
            mode: Mode::Planning,
            budgets,
            plan: None,
            counters: Counters::default(),
            transcript,
            phase: 0,
            last_report: None,
            last_verdict: None,
            pending_request: None,
            pending_guidance: None,
            termination: None,
            stop_answer: None,
            plan_versions: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.mode == Mode::Done
    }

    /// Logs a completed LLM call and counts it as an exchange.
    pub fn record_call(&mut self, call: LlmCall) {
        self.counters.exchanges += 1;
        self.transcript.append(EventKind::LlmCall(call));
    }

    fn illegal(&self, input: &Input, detail: impl Into<String>) -> IllegalTransition {
        IllegalTransition {
            mode: self.mode,
            input: input.name(),
            detail: detail.into(),
        }
    }

    fn issue_plan(&mut self, plan: GlobalPlan) {
        self.transcript.append(EventKind::PlanIssued { plan: plan.clone() });
        self.plan = Some(plan);
        self.plan_versions += 1;
        self.phase = 1;
        self.counters.revisions.clear();
        self.pending_guidance = None;
        self.mode = Mode::PhaseExecution(1);
    }

    fn collate(&mut self, termination: Termination) {
        self.termination = Some(termination);
        self.mode = Mode::Collation;
    }

    fn finish(&mut self, success: bool, answer: String) {
        let termination = self.termination.clone().unwrap_or(Termination::Completed);
        self.transcript.append(EventKind::TaskResult {
            success: success && termination == Termination::Completed,
            answer,
            termination,
        });
        self.mode = Mode::Done;
    }

    /// Applies one input. Each legal transition appends at least one event;
    /// an illegal one leaves the state untouched.
    pub fn step(&mut self, input: Input) -> Result<(), IllegalTransition> {
        match (self.mode, input) {
            (Mode::Done, input) => Err(self.illegal(&input, "run is finished")),

            (Mode::Planning, Input::PlanReady(plan)) => {
                if plan.plan_version != 1 {
                    return Err(self.illegal(&Input::PlanReady(plan), "first plan must have version 1"));
                }
                self.issue_plan(plan);
                Ok(())
            }

            (Mode::PhaseExecution(_) | Mode::LocalRevision, Input::ActionsExecuted(report)) => {
                let expected = if let Mode::PhaseExecution(k) = self.mode { k } else { self.phase };
                if report.phase_index != expected || report.steps.is_empty() {
                    return Err(self.illegal(
                        &Input::ActionsExecuted(report),
                        format!("expected a nonempty report for phase {expected}"),
                    ));
                }
                for step in &report.steps {
                    self.transcript.append(EventKind::EnvStep {
                        action: step.action.clone(),
                        outcome: step.outcome.clone(),
                    });
                }
                if let Some(answer) = report.stop_answer() {
                    self.stop_answer = Some(answer.to_string());
                }
                self.mode = if report.raised_exception {
                    Mode::FailCheck
                } else {
                    Mode::PassCheck
                };
                self.pending_guidance = None;
                self.last_report = Some(report);
                Ok(())
            }

            (Mode::PassCheck | Mode::FailCheck, Input::Verdict(verdict)) => {
                if self.mode == Mode::FailCheck && verdict.decision == VerdictDecision::Move {
                    return Err(self.illegal(&Input::Verdict(verdict), "move is not allowed after an execution error"));
                }
                self.transcript.append(EventKind::VerdictIssued {
                    verdict: verdict.clone(),
                });
                let phases = self.plan.as_ref().map_or(0, |p| p.phases.len() as u32);
                match verdict.decision {
                    VerdictDecision::Move if self.stop_answer.is_some() || self.phase >= phases => {
                        self.collate(Termination::Completed)
                    }
                    VerdictDecision::Move => {
                        self.phase += 1;
                        self.mode = Mode::PhaseExecution(self.phase);
                    }
                    VerdictDecision::Revise => {
                        let spend = Spend::LocalRevision { phase: self.phase };
                        if enforce_budget(&self.counters, &self.budgets, spend) == BudgetCheck::BudgetExhausted {
                            self.collate(Termination::BudgetExhausted);
                        } else {
                            *self.counters.revisions.entry(self.phase).or_insert(0) += 1;
                            self.mode = Mode::LocalRevision;
                        }
                    }
                    VerdictDecision::Request => {
                        if enforce_budget(&self.counters, &self.budgets, Spend::ReplanRequest) == BudgetCheck::BudgetExhausted {
                            self.collate(Termination::BudgetExhausted);
                        } else {
                            self.counters.replan_requests += 1;
                            self.mode = Mode::ReplanPending;
                        }
                    }
                }
                self.last_verdict = Some(verdict);
                Ok(())
            }

            (Mode::ReplanPending, Input::ReplanSubmitted(request)) => {
                self.transcript.append(EventKind::ReplanRequested {
                    request: request.clone(),
                });
                self.pending_request = Some(request);
                self.mode = Mode::AwaitingDecision;
                Ok(())
            }

            (Mode::AwaitingDecision, Input::Decision(decision)) => {
                let current = self.plan.as_ref().map_or(0, |p| p.plan_version);
                if let GlobalDecision::Revise { new_plan } = &decision {
                    if new_plan.plan_version != current + 1 {
                        let detail = format!("revised plan must have version {}", current + 1);
                        return Err(self.illegal(&Input::Decision(decision), detail));
                    }
                }
                self.transcript.append(EventKind::DecisionIssued {
                    decision: decision.clone(),
                });
                self.pending_request = None;
                match decision {
                    GlobalDecision::Overrule { guidance } => {
                        self.pending_guidance = Some(guidance);
                        self.mode = Mode::PhaseExecution(self.phase);
                    }
                    GlobalDecision::Revise { new_plan } => self.issue_plan(new_plan),
                }
                Ok(())
            }

            (Mode::ForceStopped | Mode::Collation, Input::ForceStop) => {
                Err(self.illegal(&Input::ForceStop, "already collating"))
            }
            (_, Input::ForceStop) => {
                self.transcript.append(EventKind::ForceStop {
                    exchange_count: self.counters.exchanges,
                });
                self.termination = Some(Termination::ForceStopped);
                self.mode = Mode::ForceStopped;
                Ok(())
            }

            (Mode::Collation | Mode::ForceStopped, Input::Finished { success, answer }) => {
                self.finish(success, answer);
                Ok(())
            }

            (_, Input::ProtocolFailure(detail)) => {
                self.termination = Some(Termination::ProtocolError(detail));
                let answer = self.stop_answer.clone().unwrap_or_default();
                self.finish(false, answer);
                Ok(())
            }

            (_, input) => Err(self.illegal(&input, "unexpected input")),
        }
    }
}
