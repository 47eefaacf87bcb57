//! JSON-over-HTTP chat completion with bounded retry.
//!
//! Wire protocol: `POST {model, messages: [{role, content}], temperature,
//! top_p}`, response carrying the assistant message text under
//! `choices[0].message.content`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::template::ChatMessage;

/// Decoding parameters; defaults are the reproducibility setting
/// (greedy: temperature 0, top_p 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            temperature: 0.0,
            top_p: 1.0,
        }
    }
}

/// One chat-completion request.
#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub messages: &'a [ChatMessage],
    pub decoding: Decoding,
}

/// Transport-level failure.
#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    /// Worth retrying: connection trouble, timeouts, 429, 5xx.
    #[error("transient transport failure: {0}")]
    Transient(String),
    /// Not worth retrying: auth failures, malformed responses, 4xx.
    #[error("permanent transport failure: {0}")]
    Permanent(String),
}

/// A single-attempt message sender. Retrying lives in [`chat_complete`], so
/// fault injection tests exercise the same retry loop real transports use.
pub trait ChatTransport: Send + Sync {
    fn send(&self, req: &ChatRequest<'_>) -> Result<String, TransportError>;
}

/// Bounded exponential backoff for transient transport failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << attempt.min(16));
        Duration::from_millis(exp.min(self.max_delay_ms))
    }
}

/// Completed chat call plus how many transient retries it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatOutcome {
    pub text: String,
    pub transport_retries: u32,
}

/// Sends one request, retrying transient failures with bounded exponential
/// backoff. Permanent failures and exhausted retries surface as errors.
pub fn chat_complete(
    transport: &dyn ChatTransport,
    req: &ChatRequest<'_>,
    retry: &RetryPolicy,
) -> Result<ChatOutcome, TransportError> {
    let mut retries = 0;
    loop {
        match transport.send(req) {
            Ok(text) => {
                return Ok(ChatOutcome {
                    text,
                    transport_retries: retries,
                })
            }
            Err(TransportError::Permanent(e)) => return Err(TransportError::Permanent(e)),
            Err(TransportError::Transient(e)) => {
                if retries >= retry.max_retries {
                    return Err(TransportError::Transient(format!(
                        "{e} (after {retries} retries)"
                    )));
                }
                std::thread::sleep(retry.delay(retries));
                retries += 1;
            }
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

/// Blocking HTTP client for chat-completion endpoints.
pub struct HttpChatClient {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("reqwest client builds");
        HttpChatClient {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            client,
        }
    }
}

impl ChatTransport for HttpChatClient {
    fn send(&self, req: &ChatRequest<'_>) -> Result<String, TransportError> {
        let body = WireRequest {
            model: &self.model,
            messages: req.messages,
            temperature: req.decoding.temperature,
            top_p: req.decoding.top_p,
        };
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| {
            // Connection-level trouble is worth retrying.
            TransportError::Transient(e.to_string())
        })?;

        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Transient(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(TransportError::Permanent(format!("status {status}")));
        }
        let parsed: WireResponse = response
            .json()
            .map_err(|e| TransportError::Permanent(format!("malformed response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportError::Permanent("response carried no choices".into()))
    }
}
