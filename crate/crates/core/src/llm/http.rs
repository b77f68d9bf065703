//! Live chat-completion client.
//!
//! POSTs `{"model", "messages", "temperature", "max_tokens"}` to the
//! configured endpoint and reads `choices[0].message.content`.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, ChatRole, LlmError};

pub const ENV_ENDPOINT: &str = "COACT_ENDPOINT";
pub const ENV_API_KEY: &str = "COACT_API_KEY";
pub const ENV_MODEL: &str = "COACT_MODEL";

const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): base * 2^attempt.
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl HttpConfig {
    /// Reads endpoint, key and model from the environment.
    ///
    /// `OPENAI_API_KEY` is accepted when `COACT_API_KEY` is unset.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        Self {
            endpoint: var(ENV_ENDPOINT).unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
            api_key: var(ENV_API_KEY).or_else(|| var("OPENAI_API_KEY")),
            model: var(ENV_MODEL).unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: Client,
    config: HttpConfig,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self { client, config })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    /// The JSON body sent for `request`.
    pub fn request_body(&self, request: &ChatRequest) -> Value {
        let mut messages = Vec::with_capacity(request.messages.len() + 1);
        if !request.system_prompt.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_prompt}));
        }
        for m in &request.messages {
            let role = match m.role {
                ChatRole::System => "system",
                ChatRole::User => "user",
                ChatRole::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": m.content}));
        }
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_response_tokens,
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, Failure> {
        let mut builder = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = response.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(Failure::Fatal(format!("HTTP {status}: {}", text.trim())));
        }
        let value: Value = response
            .json()
            .map_err(|e| Failure::Fatal(format!("malformed response body: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal("response has no choices[0].message.content".into()))
    }
}

impl ChatBackend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let body = self.request_body(request);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(msg)) => return Err(LlmError::Transport(msg)),
                Err(Failure::Retryable(msg)) => {
                    if attempt >= self.config.retry.max_retries {
                        return Err(LlmError::Transport(msg));
                    }
                    let delay = self.config.retry.delay(attempt);
                    log::warn!("chat request failed ({msg}); retrying in {delay:?}");
                    thread::sleep(delay);
                    attempt += 1;
                }
            }
        }
    }
}
