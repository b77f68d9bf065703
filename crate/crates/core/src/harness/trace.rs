//! One-line-per-event summaries of a run, used for golden trace files.

use crate::orchestrator::Termination;
use crate::protocol::GlobalDecision;
use crate::transcript::{AgentRole, EventKind, TranscriptEvent};

fn termination_name(t: &Termination) -> &'static str {
    match t {
        Termination::Completed => "completed",
        Termination::ForceStopped => "force_stopped",
        Termination::BudgetExhausted => "budget_exhausted",
        Termination::ProtocolError(_) => "protocol_error",
    }
}

pub fn summarize_event(kind: &EventKind) -> String {
    match kind {
        EventKind::LlmCall(call) => {
            let role = match call.role {
                AgentRole::GlobalPlanner => "global",
                AgentRole::LocalExecutor => "local",
            };
            format!("llm {role} {}", call.action)
        }
        EventKind::EnvStep { action, outcome } => format!("env {action} -> {outcome}"),
        EventKind::PlanIssued { plan } => format!("plan v{} ({} phases)", plan.plan_version, plan.len()),
        EventKind::VerdictIssued { verdict } => format!("verdict {}", verdict.decision),
        EventKind::ReplanRequested { request } => format!("replan_requested phase {}", request.phase_index),
        EventKind::DecisionIssued { decision } => match decision {
            GlobalDecision::Revise { new_plan } => format!("decision revise v{}", new_plan.plan_version),
            GlobalDecision::Overrule { .. } => "decision overrule".to_string(),
        },
        EventKind::ForceStop { exchange_count } => format!("force_stop after {exchange_count}"),
        EventKind::TaskResult {
            success,
            answer,
            termination,
        } => format!(
            "result success={success} termination={} answer={answer:?}",
            termination_name(termination)
        ),
    }
}

/// The whole run as text, one event per line.
pub fn summarize(events: &[TranscriptEvent]) -> String {
    events.iter().map(|e| summarize_event(&e.kind) + "\n").collect()
}
