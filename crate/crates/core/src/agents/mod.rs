//! Personas, prompts and the chat backends that drive agent turns.

pub mod backend;
#[cfg(feature = "live")]
pub mod http;
pub mod mock;
pub mod persona;
pub mod prompt;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::EmotionalState;
pub use backend::{BackendError, ChatBackend, ChatRequest, WireMessage, WireRole};
pub use mock::{mock_backend, MockBackend, MockProfile, ScriptedBackend};
pub use persona::{roster, rotation, Persona};
pub use prompt::{dummy_script, system_prompt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            temperature: 0.8,
            max_tokens: 256,
        }
    }
}

/// Everything needed to prompt one agent. The backend itself is supplied
/// separately so specs stay serializable and credential-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub persona: Persona,
    pub counterpart: Persona,
    pub state: EmotionalState,
    pub exemplars: Vec<String>,
    pub model: String,
    pub decoding: Decoding,
}

/// Speaker of a history entry, relative to the agent being prompted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    #[serde(rename = "self")]
    Own,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn own(content: impl Into<String>) -> Self {
        Self {
            role: Role::Own,
            content: content.into(),
        }
    }

    pub fn other(content: impl Into<String>) -> Self {
        Self {
            role: Role::Other,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::ZERO,
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TurnError {
    #[error("history must alternate and end with the counterpart: {0}")]
    InvalidHistory(String),
    #[error("backend unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend returned empty replies on all {attempts} attempts")]
    EmptyReply { attempts: u32 },
    #[error("backend rejected the request: {0}")]
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutput {
    pub text: String,
    pub retries: u32,
}

/// Wire request for an agent: system prompt, then own turns as `assistant`
/// and counterpart turns as `user`.
pub fn build_request(spec: &AgentSpec, history: &[Message]) -> ChatRequest {
    let mut messages = Vec::with_capacity(history.len() + 1);
    messages.push(WireMessage {
        role: WireRole::System,
        content: system_prompt(spec),
    });
    messages.extend(history.iter().map(|m| WireMessage {
        role: match m.role {
            Role::System => WireRole::System,
            Role::Own => WireRole::Assistant,
            Role::Other => WireRole::User,
        },
        content: m.content.clone(),
    }));
    ChatRequest {
        model: spec.model.clone(),
        messages,
        temperature: spec.decoding.temperature,
        max_tokens: spec.decoding.max_tokens,
    }
}

fn check_history(history: &[Message]) -> Result<(), TurnError> {
    if let Some(pos) = history.iter().position(|m| m.role == Role::System) {
        return Err(TurnError::InvalidHistory(format!("system message at position {pos}")));
    }
    for (i, pair) in history.windows(2).enumerate() {
        if pair[0].role == pair[1].role {
            return Err(TurnError::InvalidHistory(format!(
                "messages {i} and {} share a speaker",
                i + 1
            )));
        }
    }
    match history.last() {
        Some(m) if m.role == Role::Own => {
            Err(TurnError::InvalidHistory("last message is the agent's own".into()))
        }
        _ => Ok(()),
    }
}

/// Generates the agent's next reply, retrying transient failures and
/// whitespace-only replies with exponential backoff.
pub fn next_turn(
    spec: &AgentSpec,
    history: &[Message],
    backend: &dyn ChatBackend,
    retry: &RetryPolicy,
) -> Result<TurnOutput, TurnError> {
    check_history(history)?;
    let request = build_request(spec, history);
    let attempts = retry.max_retries + 1;
    let mut last_transport: Option<String> = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = retry.delay(attempt - 1);
            log::debug!("retry {attempt}/{} after {:?}", retry.max_retries, delay);
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
        }
        match backend.complete(&request) {
            Ok(text) => {
                let text = text.trim();
                if !text.is_empty() {
                    if attempt > 0 {
                        log::info!("{}: reply obtained after {attempt} retries", spec.persona.name);
                    }
                    return Ok(TurnOutput {
                        text: text.to_string(),
                        retries: attempt,
                    });
                }
                log::warn!("{}: empty reply (attempt {})", spec.persona.name, attempt + 1);
                last_transport = None;
            }
            Err(BackendError::Fatal(msg)) => return Err(TurnError::Rejected(msg)),
            Err(BackendError::Transient(msg)) => {
                log::warn!("{}: transient failure: {msg}", spec.persona.name);
                last_transport = Some(msg);
            }
        }
    }
    Err(match last_transport {
        Some(message) => TurnError::Transport { attempts, message },
        None => TurnError::EmptyReply { attempts },
    })
}

fn normalize_for_loop(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// True when the last four replies are pairwise near-duplicates
/// (normalized Levenshtein similarity above 0.9).
pub fn loop_suspected<S: AsRef<str>>(replies: &[S]) -> bool {
    if replies.len() < 4 {
        return false;
    }
    let tail: Vec<String> = replies[replies.len() - 4..]
        .iter()
        .map(|r| normalize_for_loop(r.as_ref()))
        .collect();
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            if strsim::normalized_levenshtein(&tail[i], &tail[j]) <= 0.9 {
                return false;
            }
        }
    }
    true
}
