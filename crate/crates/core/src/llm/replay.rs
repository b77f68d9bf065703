//! Backend that serves the responses recorded in a transcript.

use std::sync::Mutex;

use super::{ChatBackend, ChatRequest, LlmError};
use crate::transcript::{EventKind, TranscriptEvent};

/// Replays recorded LLM calls in order, checking each prompt.
///
/// A prompt that differs from the recording (or a call past the end of
/// the recording) yields [`LlmError::ReplayDivergence`] carrying the seq
/// of the recorded event it was compared against.
#[derive(Debug)]
pub struct ReplayBackend {
    calls: Vec<(u64, String, String)>,
    cursor: Mutex<usize>,
    next_seq_after_end: u64,
}

impl ReplayBackend {
    pub fn from_events(events: &[TranscriptEvent]) -> Self {
        let calls = events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::LlmCall(call) => Some((e.seq, call.prompt.clone(), call.response.clone())),
                _ => None,
            })
            .collect();
        Self {
            calls,
            cursor: Mutex::new(0),
            next_seq_after_end: events.len() as u64,
        }
    }

    pub fn remaining(&self) -> usize {
        self.calls.len() - *self.cursor.lock().unwrap()
    }
}

impl ChatBackend for ReplayBackend {
    fn id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let mut cursor = self.cursor.lock().unwrap();
        let Some((seq, prompt, response)) = self.calls.get(*cursor) else {
            return Err(LlmError::ReplayDivergence {
                seq: self.next_seq_after_end,
            });
        };
        if request.rendered_prompt() != *prompt {
            return Err(LlmError::ReplayDivergence { seq: *seq });
        }
        *cursor += 1;
        Ok(response.clone())
    }
}
