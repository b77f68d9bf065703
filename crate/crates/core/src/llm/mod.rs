//! Chat-completion interface shared by both agents.
//!
//! [`ChatBackend`] is the transport: a live HTTP client, a scripted
//! backend for tests, or a replay backend fed from a transcript.
//! [`Exchange`] is what agents talk to; it adds transcript recording and,
//! inside the orchestrator, exchange budgeting.

mod http;
mod replay;
mod scripted;
mod search;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, RetryPolicy, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use replay::ReplayBackend;
pub use scripted::{PromptMatcher, ScriptFile, ScriptedBackend, ScriptedExchange};
pub use search::{
    augment_with_search, truncate_words, word_count, FixtureSearchProvider, ProviderError, RetrievalProvider,
    RetrievedPassage, SearchEntry, Snippet, MAX_PASSAGE_WORDS,
};

use crate::protocol::{Validate, Violation};
use crate::transcript::{AgentRole, LlmCall};

/// Default sampling temperature for every agent call.
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_response_tokens: u32,
}

impl ChatRequest {
    pub fn new(system_prompt: impl Into<String>, user: impl Into<String>, settings: &SamplingSettings) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            messages: vec![ChatMessage::user(user)],
            temperature: settings.temperature,
            max_response_tokens: settings.max_response_tokens,
        }
    }

    /// The text a scripted matcher or a replay check sees.
    pub fn rendered_prompt(&self) -> String {
        let mut parts = Vec::with_capacity(self.messages.len() + 1);
        if !self.system_prompt.is_empty() {
            parts.push(self.system_prompt.clone());
        }
        for (i, m) in self.messages.iter().enumerate() {
            if i == 0 && m.role == ChatRole::User {
                parts.push(m.content.clone());
            } else {
                let tag = match m.role {
                    ChatRole::System => "SYSTEM",
                    ChatRole::User => "USER",
                    ChatRole::Assistant => "ASSISTANT",
                };
                parts.push(format!("[{tag}]\n{}", m.content));
            }
        }
        parts.join("\n\n")
    }
}

impl Validate for ChatRequest {
    fn check(&self, _path: &str, out: &mut Vec<Violation>) {
        match self.messages.iter().find(|m| m.role != ChatRole::System) {
            None => out.push(Violation::new("messages", "must contain a user message")),
            Some(m) if m.role != ChatRole::User => out.push(Violation::new(
                "messages",
                "first non-system message must be from the user",
            )),
            Some(_) => {}
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            out.push(Violation::new("temperature", "must be >= 0"));
        }
        if self.max_response_tokens == 0 {
            out.push(Violation::new("max_response_tokens", "must be positive"));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSettings {
    pub temperature: f64,
    pub max_response_tokens: u32,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            max_response_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("scripted backend has no exchange left")]
    BackendExhausted,
    #[error("no scripted exchange matches prompt: {0}")]
    UnmatchedPrompt(String),
    #[error("backend returned an empty response")]
    ResponseEmpty,
    #[error("replay diverged at event {seq}")]
    ReplayDivergence { seq: u64 },
    #[error("exchange budget exhausted after {exchanges} calls")]
    ForceStop { exchanges: u32 },
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
}

impl LlmError {
    pub fn is_transport(&self) -> bool {
        matches!(self, LlmError::Transport(_))
    }
}

/// A chat-completion transport.
///
/// Implementations must be shareable across concurrently running tasks.
pub trait ChatBackend: Send + Sync {
    /// Short label recorded in transcripts and reports.
    fn id(&self) -> String;

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Runs one call and hands the resulting [`LlmCall`] to `sink`.
///
/// The call is recorded whenever the backend produced a response, even a
/// blank one, so replays see exactly the same dialogue. Blank responses
/// are then reported as [`LlmError::ResponseEmpty`].
pub fn complete(
    backend: &dyn ChatBackend,
    role: AgentRole,
    action: &str,
    request: &ChatRequest,
    sink: &mut dyn FnMut(LlmCall),
) -> Result<String, LlmError> {
    if let Err(violations) = request.validate() {
        return Err(LlmError::InvalidRequest(crate::protocol::describe(&violations)));
    }
    let started = Instant::now();
    let response = backend.complete(request)?;
    sink(LlmCall {
        role,
        action: action.to_string(),
        prompt: request.rendered_prompt(),
        response: response.clone(),
        latency_ms: started.elapsed().as_millis() as u64,
    });
    if response.trim().is_empty() {
        return Err(LlmError::ResponseEmpty);
    }
    Ok(response)
}

/// The channel agents send prompts through.
pub trait Exchange {
    fn complete(&mut self, role: AgentRole, action: &str, request: ChatRequest) -> Result<String, LlmError>;
}

/// Failure of [`ask_parsed`]: the exchange failed, or both the original
/// reply and the repaired reply were unparseable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AskError<E> {
    Llm(LlmError),
    Parse(E),
}

/// Sends `request` and parses the reply. An unparseable or blank reply
/// gets one follow-up turn carrying `repair(&error)`; a second failure
/// returns that error.
pub fn ask_parsed<T, E>(
    exchange: &mut dyn Exchange,
    role: AgentRole,
    action: &str,
    request: ChatRequest,
    parse: impl Fn(&str) -> Result<T, E>,
    empty: impl Fn() -> E,
    repair: impl Fn(&E) -> String,
) -> Result<T, AskError<E>> {
    let first = match exchange.complete(role, action, request.clone()) {
        Ok(text) => (parse(&text), text),
        Err(LlmError::ResponseEmpty) => (Err(empty()), String::new()),
        Err(e) => return Err(AskError::Llm(e)),
    };
    let (error, reply) = match first {
        (Ok(value), _) => return Ok(value),
        (Err(e), reply) => (e, reply),
    };
    let mut retry = request;
    retry.messages.push(ChatMessage::assistant(reply));
    retry.messages.push(ChatMessage::user(repair(&error)));
    match exchange.complete(role, &format!("{action}_repair"), retry) {
        Ok(text) => parse(&text).map_err(AskError::Parse),
        Err(LlmError::ResponseEmpty) => Err(AskError::Parse(empty())),
        Err(e) => Err(AskError::Llm(e)),
    }
}

/// Per-task count of completed LLM calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UsageCounter {
    exchanges: u32,
}

impl UsageCounter {
    pub fn record_usage(&mut self, _call: &LlmCall) -> u32 {
        self.exchanges += 1;
        self.exchanges
    }

    pub fn exchanges(&self) -> u32 {
        self.exchanges
    }
}

/// Unbudgeted [`Exchange`] that keeps every call; used outside the orchestrator.
pub struct Recorder<'a> {
    backend: &'a dyn ChatBackend,
    pub calls: Vec<LlmCall>,
    pub usage: UsageCounter,
}

impl<'a> Recorder<'a> {
    pub fn new(backend: &'a dyn ChatBackend) -> Self {
        Self {
            backend,
            calls: Vec::new(),
            usage: UsageCounter::default(),
        }
    }

    pub fn last_prompt(&self) -> Option<&str> {
        self.calls.last().map(|c| c.prompt.as_str())
    }
}

impl Exchange for Recorder<'_> {
    fn complete(&mut self, role: AgentRole, action: &str, request: ChatRequest) -> Result<String, LlmError> {
        let calls = &mut self.calls;
        let usage = &mut self.usage;
        complete(self.backend, role, action, &request, &mut |call| {
            usage.record_usage(&call);
            calls.push(call);
        })
    }
}
