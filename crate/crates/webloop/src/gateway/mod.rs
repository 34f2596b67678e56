//! Uniform access to language-model backends.
//!
//! A [`Backend`] couples a [`BackendConfig`] with its runtime: a remote
//! chat-completion endpoint or a deterministic scripted behavior. Every call
//! goes through [`Backend::complete`], which retries transient transport
//! failures and records one [`ChatExchange`] per call in the audit log.

mod audit;
pub mod parse;
pub mod prompts;
mod scripted;
mod transport;

pub use audit::{AuditLog, ChatExchange};
pub use parse::{extract_tags, strip_thinking};
pub use scripted::{request_fingerprint, Responder, ScriptedBehavior};
pub use transport::{ChatRequest, HttpTransport, Transport, TransportFailure};

use crate::action::Action;
use crate::knowledge::KnowledgeEntry;
use crate::trajectory::{Observation, Trajectory};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

/// Where a backend runs. The privacy router depends on this being declared
/// at construction and immutable afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Locality {
    Cloud,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Scripted,
}

fn default_temperature() -> f64 {
    0.6
}

fn default_max_tokens() -> u32 {
    2048
}

/// Declarative backend description. Scripted backends ignore the endpoint
/// and api-key fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env_var: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    pub locality: Locality,
}

impl BackendConfig {
    pub fn scripted(model_name: impl Into<String>, locality: Locality) -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            endpoint_url: None,
            model_name: model_name.into(),
            api_key_env_var: None,
            temperature: default_temperature(),
            max_output_tokens: default_max_tokens(),
            locality,
        }
    }

    pub fn remote(
        model_name: impl Into<String>,
        endpoint_url: impl Into<String>,
        api_key_env_var: impl Into<String>,
        locality: Locality,
    ) -> Self {
        BackendConfig {
            kind: BackendKind::Remote,
            endpoint_url: Some(endpoint_url.into()),
            model_name: model_name.into(),
            api_key_env_var: Some(api_key_env_var.into()),
            temperature: default_temperature(),
            max_output_tokens: default_max_tokens(),
            locality,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.temperature < 0.0 {
            return Err(GatewayError::Config("temperature must be >= 0".to_string()));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::Config("max_output_tokens must be positive".to_string()));
        }
        if self.kind == BackendKind::Remote {
            if self.endpoint_url.is_none() {
                return Err(GatewayError::Config(format!(
                    "remote backend `{}` needs an endpoint_url",
                    self.model_name
                )));
            }
            if self.api_key_env_var.is_none() {
                return Err(GatewayError::Config(format!(
                    "remote backend `{}` needs an api_key_env_var",
                    self.model_name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s) against `{backend}`: {message}")]
    Transport {
        backend: String,
        attempts: u32,
        message: String,
    },
    #[error("credentials rejected for `{backend}`: {message}")]
    Auth { backend: String, message: String },
    #[error("scripted backend has no response for fingerprint {fingerprint}")]
    ScriptMiss { fingerprint: String },
    #[error("no candidate actions parsed after retry")]
    CandidateParse,
    #[error("backend configuration: {0}")]
    Config(String),
}

enum Runtime {
    Remote(Box<dyn Transport>),
    Scripted(ScriptedBehavior),
}

/// A configured backend plus its runtime and audit log.
pub struct Backend {
    config: BackendConfig,
    runtime: Runtime,
    audit: Arc<AuditLog>,
    backoff_base: Duration,
    system_preamble: Option<String>,
}

/// Transient failures are retried this many times (after the first attempt).
const MAX_RETRIES: u32 = 2;

impl Backend {
    pub fn scripted(config: BackendConfig, behavior: ScriptedBehavior) -> Result<Self, GatewayError> {
        config.validate()?;
        if config.kind != BackendKind::Scripted {
            return Err(GatewayError::Config(format!(
                "backend `{}` is not declared scripted",
                config.model_name
            )));
        }
        Ok(Backend {
            config,
            runtime: Runtime::Scripted(behavior),
            audit: Arc::new(AuditLog::new()),
            backoff_base: Duration::from_millis(250),
            system_preamble: None,
        })
    }

    pub fn remote(config: BackendConfig) -> Result<Self, GatewayError> {
        Self::remote_with_transport(config, Box::new(HttpTransport::new()))
    }

    pub fn remote_with_transport(
        config: BackendConfig,
        transport: Box<dyn Transport>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        if config.kind != BackendKind::Remote {
            return Err(GatewayError::Config(format!(
                "backend `{}` is not declared remote",
                config.model_name
            )));
        }
        Ok(Backend {
            config,
            runtime: Runtime::Remote(transport),
            audit: Arc::new(AuditLog::new()),
            backoff_base: Duration::from_millis(250),
            system_preamble: None,
        })
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    /// Attaches a chain-of-thought system preamble. Responses may then carry
    /// thinking blocks, which structured extraction strips before parsing.
    pub fn with_system_preamble(mut self, preamble: impl Into<String>) -> Self {
        self.system_preamble = Some(preamble.into());
        self
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = audit;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn locality(&self) -> Locality {
        self.config.locality
    }

    pub fn name(&self) -> &str {
        &self.config.model_name
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    fn effective_system(&self, system: &str) -> String {
        match &self.system_preamble {
            Some(preamble) => format!("{preamble}\n\n{system}"),
            None => system.to_string(),
        }
    }

    /// Sends one request and returns the model's text. Transient transport
    /// failures are retried up to two times with exponential backoff; every
    /// call appends exactly one exchange to the audit log.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, GatewayError> {
        let system = self.effective_system(system);
        let (result, attempts) = match &self.runtime {
            Runtime::Scripted(behavior) => {
                let result = behavior.lookup(&system, user).ok_or_else(|| {
                    GatewayError::ScriptMiss {
                        fingerprint: request_fingerprint(&system, user),
                    }
                });
                (result, 1)
            }
            Runtime::Remote(transport) => self.complete_remote(transport.as_ref(), &system, user),
        };
        self.audit.append(ChatExchange {
            timestamp: chrono::Utc::now().to_rfc3339(),
            backend: self.config.model_name.clone(),
            system_prompt: system,
            user_turns: vec![user.to_string()],
            raw_response: match &result {
                Ok(text) => text.clone(),
                Err(err) => format!("<error: {err}>"),
            },
            attempts,
            ok: result.is_ok(),
        });
        result
    }

    fn complete_remote(
        &self,
        transport: &dyn Transport,
        system: &str,
        user: &str,
    ) -> (Result<String, GatewayError>, u32) {
        let backend = self.config.model_name.clone();
        let endpoint = self.config.endpoint_url.as_deref().unwrap_or_default();
        let key_var = self.config.api_key_env_var.as_deref().unwrap_or_default();
        let api_key = match std::env::var(key_var) {
            Ok(key) => key,
            Err(_) => {
                return (
                    Err(GatewayError::Auth {
                        backend,
                        message: format!("environment variable `{key_var}` is not set"),
                    }),
                    0,
                )
            }
        };
        let request = ChatRequest {
            endpoint,
            model: &self.config.model_name,
            system,
            user,
            temperature: self.config.temperature,
            max_tokens: self.config.max_output_tokens,
            api_key: Some(&api_key),
        };
        let mut attempts = 0;
        loop {
            attempts += 1;
            match transport.send(&request) {
                Ok(text) => return (Ok(text), attempts),
                Err(TransportFailure::Auth(message)) => {
                    return (Err(GatewayError::Auth { backend, message }), attempts)
                }
                Err(TransportFailure::Fatal(message)) => {
                    return (
                        Err(GatewayError::Transport {
                            backend,
                            attempts,
                            message,
                        }),
                        attempts,
                    )
                }
                Err(TransportFailure::Transient(message)) => {
                    if attempts > MAX_RETRIES {
                        return (
                            Err(GatewayError::Transport {
                                backend,
                                attempts,
                                message,
                            }),
                            attempts,
                        );
                    }
                    std::thread::sleep(self.backoff_base * 2u32.pow(attempts - 1));
                }
            }
        }
    }
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend")
            .field("model", &self.config.model_name)
            .field("kind", &self.config.kind)
            .field("locality", &self.config.locality)
            .finish()
    }
}

/// Predicts the next action for the current observation.
///
/// The prompt carries the action-space description, the objective, the
/// serialized history, any retrieved examples, and the observation. If the
/// response yields no parseable action the request is retried once with a
/// format reminder, then falls back to `stop [N/A parse failure]`.
pub fn predict_action(
    backend: &Backend,
    instruction: &str,
    history: &Trajectory,
    observation: &Observation,
    examples: &[KnowledgeEntry],
) -> Result<(Action, String), GatewayError> {
    let system = prompts::action_system_prompt();
    let user = prompts::predict_prompt(instruction, history, observation, examples);
    let response = backend.complete(&system, &user)?;
    if let Some(hit) = parse::extract_action(&response) {
        return Ok(hit);
    }
    let retry_user = format!("{user}\n\n{}", prompts::FORMAT_REMINDER);
    let response = backend.complete(&system, &retry_user)?;
    if let Some(hit) = parse::extract_action(&response) {
        return Ok(hit);
    }
    Ok((
        Action::Stop {
            answer: "N/A parse failure".to_string(),
        },
        "no parseable action after a format reminder; stopping".to_string(),
    ))
}

/// Requests `k` ranked candidate actions with rationales. Candidates are
/// deduplicated under normalization, rank order preserved; at least one
/// candidate is returned or the call fails with `CandidateParse`.
pub fn propose_candidates(
    backend: &Backend,
    instruction: &str,
    history: &Trajectory,
    observation: &Observation,
    k: usize,
) -> Result<Vec<(Action, String)>, GatewayError> {
    assert!(k >= 1, "candidate count must be >= 1");
    let system = prompts::action_system_prompt();
    let user = prompts::candidates_prompt(instruction, history, observation, k);
    let response = backend.complete(&system, &user)?;
    let candidates = parse::extract_candidates(&response, k);
    if !candidates.is_empty() {
        return Ok(candidates);
    }
    let retry_user = format!("{user}\n\n{}", prompts::FORMAT_REMINDER);
    let response = backend.complete(&system, &retry_user)?;
    let candidates = parse::extract_candidates(&response, k);
    if candidates.is_empty() {
        return Err(GatewayError::CandidateParse);
    }
    Ok(candidates)
}
