//! Wire transport for remote chat-completion backends.
//!
//! The wire contract is a JSON body with the model name, a role/content
//! message list, temperature, and max token count, POSTed to the configured
//! endpoint; the reply carries the text at `choices[0].message.content`.

use serde::Deserialize;
use serde_json::json;
use std::time::Duration;

/// One outbound chat request.
#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub endpoint: &'a str,
    pub model: &'a str,
    pub system: &'a str,
    pub user: &'a str,
    pub temperature: f64,
    pub max_tokens: u32,
    pub api_key: Option<&'a str>,
}

/// Transport-level failure classification, which drives the retry policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    /// Worth retrying: timeouts, connection errors, 408/429/5xx.
    Transient(String),
    /// Credential rejection: missing key, 401, 403. Never retried.
    Auth(String),
    /// Anything else that will not improve on retry.
    Fatal(String),
}

impl TransportFailure {
    pub fn message(&self) -> &str {
        match self {
            TransportFailure::Transient(m) | TransportFailure::Auth(m) | TransportFailure::Fatal(m) => m,
        }
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest<'_>) -> Result<String, TransportFailure>;
}

#[derive(Deserialize)]
struct CompletionReply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self::with_timeout(Duration::from_secs(60))
    }

    pub fn with_timeout(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        HttpTransport {
            agent: config.new_agent(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest<'_>) -> Result<String, TransportFailure> {
        let body = json!({
            "model": request.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
        .to_string();

        let mut call = self
            .agent
            .post(request.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = request.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send(body.as_bytes())
            .map_err(|e| TransportFailure::Transient(e.to_string()))?;

        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Err(TransportFailure::Auth(format!("status {status}"))),
            408 | 429 | 500..=599 => {
                return Err(TransportFailure::Transient(format!("status {status}")))
            }
            _ => return Err(TransportFailure::Fatal(format!("status {status}"))),
        }

        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportFailure::Transient(e.to_string()))?;
        let reply: CompletionReply = serde_json::from_str(&text)
            .map_err(|e| TransportFailure::Fatal(format!("bad completion body: {e}")))?;
        reply
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportFailure::Fatal("completion body had no choices".to_string()))
    }
}
