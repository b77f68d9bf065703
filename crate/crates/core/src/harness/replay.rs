//! Re-executes a recorded run and checks it reproduces event for event.

use std::sync::Arc;

use thiserror::Error;

use crate::env::{EnvConfig, SiteFixture};
use crate::llm::{ReplayBackend, SamplingSettings};
use crate::orchestrator::{run_task, RunError, RunOptions, TaskOutcome};
use crate::prompts::PromptSet;
use crate::transcript::{comparable, EventKind, TranscriptFile};

#[derive(Debug, Error)]
pub enum ReplayError {
    /// A prompt, environment step or agent decision differs from the
    /// recording at event `seq`.
    #[error("replay diverged at event {seq}")]
    Divergence { seq: u64 },
    #[error("transcript has no task result")]
    Incomplete,
    #[error("replay could not run: {0}")]
    Run(RunError),
}

/// Re-runs the transcript's task against `fixture`, answering every LLM
/// call from the recording.
pub fn replay(file: &TranscriptFile, fixture: Arc<SiteFixture>, prompts: Arc<PromptSet>) -> Result<TaskOutcome, ReplayError> {
    if file.result().is_none() {
        return Err(ReplayError::Incomplete);
    }
    let header = &file.header;
    let options = RunOptions {
        budgets: header.budgets,
        sampling: SamplingSettings {
            temperature: header.temperature,
            ..SamplingSettings::default()
        },
        env: EnvConfig::default(),
        prompts,
        augment_search: header.augment_search,
        search: None,
        passages: Some(header.passages.clone()),
        local_agents: 1,
    };
    let backend = ReplayBackend::from_events(&file.events);
    let result = match run_task(&header.task, fixture, &backend, &options, None) {
        Ok(r) => r,
        Err(RunError::Diverged { seq }) => return Err(ReplayError::Divergence { seq }),
        Err(e) => return Err(ReplayError::Run(e)),
    };
    let recorded = comparable(&file.events);
    let replayed = comparable(&result.events);
    if let Some(seq) = first_difference(&recorded, &replayed) {
        return Err(ReplayError::Divergence { seq });
    }
    Ok(result.outcome)
}

fn first_difference(a: &[(u64, EventKind)], b: &[(u64, EventKind)]) -> Option<u64> {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            return Some(i as u64);
        }
    }
    (a.len() != b.len()).then(|| a.len().min(b.len()) as u64)
}

/// The outcome a transcript records, rebuilt without re-running.
pub fn recorded_outcome(file: &TranscriptFile) -> Option<TaskOutcome> {
    let (success, answer, termination) = file.result()?;
    let count = |pred: fn(&EventKind) -> bool| file.events.iter().filter(|e| pred(&e.kind)).count() as u32;
    Some(TaskOutcome {
        task_id: file.header.task.id.clone(),
        success,
        final_answer: answer.to_string(),
        termination: termination.clone(),
        exchanges_used: count(|k| matches!(k, EventKind::LlmCall(_))),
        plan_versions: count(|k| matches!(k, EventKind::PlanIssued { .. })),
    })
}
