//! Append-only event log of a task run, and its line-delimited JSON file
//! format.
//!
//! A transcript file is one header record followed by one event record
//! per line:
//!
//! ```text
//! {"format":"coact-transcript","version":1,"task":{...},"budgets":{...},...}
//! {"seq":0,"ts":1760000000000,"kind":"llm_call","payload":{...}}
//! {"seq":1,"ts":1760000000004,"kind":"plan_issued","payload":{"plan":{...}}}
//! ```
//!
//! Records are flushed as they are appended, so a crashed run leaves a
//! readable prefix.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::RetrievedPassage;
use crate::orchestrator::Termination;
use crate::protocol::{
    Budgets, GlobalDecision, GlobalPlan, LocalVerdict, PageAction, ReplanRequest, StepOutcome, Task,
    ValidationResult, Violation,
};

pub const TRANSCRIPT_FORMAT: &str = "coact-transcript";
pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    GlobalPlanner,
    LocalExecutor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmCall {
    pub role: AgentRole,
    /// Agent action that produced the prompt, e.g. `global_plan` or `pass_check`.
    pub action: String,
    pub prompt: String,
    pub response: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    LlmCall(LlmCall),
    EnvStep {
        action: PageAction,
        outcome: StepOutcome,
    },
    PlanIssued {
        plan: GlobalPlan,
    },
    VerdictIssued {
        verdict: LocalVerdict,
    },
    ReplanRequested {
        request: ReplanRequest,
    },
    DecisionIssued {
        decision: GlobalDecision,
    },
    ForceStop {
        exchange_count: u32,
    },
    TaskResult {
        success: bool,
        answer: String,
        termination: Termination,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::LlmCall(_) => "llm_call",
            EventKind::EnvStep { .. } => "env_step",
            EventKind::PlanIssued { .. } => "plan_issued",
            EventKind::VerdictIssued { .. } => "verdict_issued",
            EventKind::ReplanRequested { .. } => "replan_requested",
            EventKind::DecisionIssued { .. } => "decision_issued",
            EventKind::ForceStop { .. } => "force_stop",
            EventKind::TaskResult { .. } => "task_result",
        }
    }

    /// Copy with wall-clock measurements zeroed.
    pub fn without_timing(&self) -> EventKind {
        match self {
            EventKind::LlmCall(call) => EventKind::LlmCall(LlmCall {
                latency_ms: 0,
                ..call.clone()
            }),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub ts: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Run metadata written as the first record of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub budgets: Budgets,
    pub temperature: f64,
    pub augment_search: bool,
    /// Passages injected into planning prompts, kept so replay needs no provider.
    #[serde(default)]
    pub passages: Vec<RetrievedPassage>,
    pub backend: String,
}

impl TranscriptHeader {
    pub fn new(task: Task, budgets: Budgets, temperature: f64, passages: Vec<RetrievedPassage>, backend: impl Into<String>) -> Self {
        Self {
            format: TRANSCRIPT_FORMAT.to_string(),
            version: TRANSCRIPT_VERSION,
            augment_search: !passages.is_empty(),
            task,
            budgets,
            temperature,
            passages,
            backend: backend.into(),
        }
    }
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// In-memory event log with an optional line-delimited stream behind it.
#[derive(Default)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
    stream: Option<Box<dyn Write + Send>>,
    stream_error: Option<io::Error>,
}

impl std::fmt::Debug for Transcript {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transcript")
            .field("events", &self.events.len())
            .field("streaming", &self.stream.is_some())
            .finish()
    }
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Streams every event to `out` after writing `header`.
    pub fn streaming(header: &TranscriptHeader, mut out: Box<dyn Write + Send>) -> io::Result<Self> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(Self {
            events: Vec::new(),
            stream: Some(out),
            stream_error: None,
        })
    }

    pub fn append(&mut self, kind: EventKind) -> u64 {
        let seq = self.events.len() as u64;
        let event = TranscriptEvent {
            seq,
            ts: now_millis(),
            kind,
        };
        if let Some(out) = self.stream.as_mut() {
            let written = serde_json::to_writer(&mut *out, &event)
                .map_err(io::Error::from)
                .and_then(|_| out.write_all(b"\n"))
                .and_then(|_| out.flush());
            if let Err(err) = written {
                log::warn!("transcript stream failed at seq {seq}: {err}");
                self.stream = None;
                self.stream_error = Some(err);
            }
        }
        self.events.push(event);
        seq
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<TranscriptEvent> {
        self.events
    }

    /// First write failure on the backing stream, if any.
    pub fn take_stream_error(&mut self) -> Option<io::Error> {
        self.stream_error.take()
    }

    pub fn llm_calls(&self) -> impl Iterator<Item = &LlmCall> {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::LlmCall(call) => Some(call),
            _ => None,
        })
    }
}

/// Event kinds with timing stripped, for replay comparison.
pub fn comparable(events: &[TranscriptEvent]) -> Vec<(u64, EventKind)> {
    events.iter().map(|e| (e.seq, e.kind.without_timing())).collect()
}

/// Checks sequencing and termination invariants of a complete transcript.
pub fn check_events(events: &[TranscriptEvent]) -> ValidationResult {
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 {
            out.push(Violation::new(
                format!("events[{i}].seq"),
                format!("expected seq {i}, found {}", e.seq),
            ));
        }
    }
    let results: Vec<usize> = positions(events, |k| matches!(k, EventKind::TaskResult { .. }));
    match results.as_slice() {
        [last] if *last + 1 == events.len() => {}
        [] => out.push(Violation::new("events", "missing terminating task_result")),
        _ => out.push(Violation::new(
            "events",
            "exactly one task_result must end the transcript",
        )),
    }
    let stops = positions(events, |k| matches!(k, EventKind::ForceStop { .. }));
    match stops.as_slice() {
        [] => {}
        [at] => match events.get(at + 1).map(|e| &e.kind) {
            Some(EventKind::TaskResult { success: false, .. }) => {}
            _ => out.push(Violation::new(
                format!("events[{at}]"),
                "force_stop must be followed by an unsuccessful task_result",
            )),
        },
        _ => out.push(Violation::new("events", "at most one force_stop")),
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn positions(events: &[TranscriptEvent], pred: impl Fn(&EventKind) -> bool) -> Vec<usize> {
    events
        .iter()
        .enumerate()
        .filter(|(_, e)| pred(&e.kind))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript io: {0}")]
    Io(#[from] io::Error),
    #[error("transcript corrupt at line {line}: {detail}")]
    Corrupt { line: usize, detail: String },
}

/// A transcript read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptFile {
    pub header: TranscriptHeader,
    pub events: Vec<TranscriptEvent>,
    /// Non-fatal problems, e.g. a truncated final record.
    pub warnings: Vec<String>,
}

impl TranscriptFile {
    /// The terminating task result, if the run finished.
    pub fn result(&self) -> Option<(bool, &str, &Termination)> {
        self.events.iter().rev().find_map(|e| match &e.kind {
            EventKind::TaskResult {
                success,
                answer,
                termination,
            } => Some((*success, answer.as_str(), termination)),
            _ => None,
        })
    }
}

pub fn write_transcript(path: &Path, header: &TranscriptHeader, events: &[TranscriptEvent]) -> Result<(), TranscriptError> {
    let mut out = io::BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    for event in events {
        serde_json::to_writer(&mut out, event).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<TranscriptFile, TranscriptError> {
    parse_transcript(BufReader::new(File::open(path)?))
}

/// Reads a transcript from any buffered source.
///
/// A final record without its terminating newline that fails to decode is
/// treated as a crash-truncated write: earlier events are returned with a
/// warning. Any other undecodable line is corruption.
pub fn parse_transcript(mut reader: impl BufRead) -> Result<TranscriptFile, TranscriptError> {
    let mut header: Option<TranscriptHeader> = None;
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    let mut line_no = 0usize;
    let mut buf = String::new();

    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let line = buf.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: TranscriptHeader = serde_json::from_str(line).map_err(|e| TranscriptError::Corrupt {
                line: line_no,
                detail: format!("bad header: {e}"),
            })?;
            if h.format != TRANSCRIPT_FORMAT || h.version != TRANSCRIPT_VERSION {
                return Err(TranscriptError::Corrupt {
                    line: line_no,
                    detail: format!("unsupported format {} v{}", h.format, h.version),
                });
            }
            header = Some(h);
            continue;
        }
        match serde_json::from_str::<TranscriptEvent>(line) {
            Ok(event) => {
                if event.seq != events.len() as u64 {
                    return Err(TranscriptError::Corrupt {
                        line: line_no,
                        detail: format!("expected seq {}, found {}", events.len(), event.seq),
                    });
                }
                events.push(event);
            }
            Err(e) if !complete && e.is_eof() => {
                warnings.push(format!(
                    "line {line_no}: truncated record ignored ({} events kept)",
                    events.len()
                ));
                log::warn!("{}", warnings.last().unwrap());
            }
            Err(e) => {
                return Err(TranscriptError::Corrupt {
                    line: line_no,
                    detail: e.to_string(),
                })
            }
        }
    }

    let header = header.ok_or(TranscriptError::Corrupt {
        line: 0,
        detail: "missing header".into(),
    })?;
    Ok(TranscriptFile {
        header,
        events,
        warnings,
    })
}
