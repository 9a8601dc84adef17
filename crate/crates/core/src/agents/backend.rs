use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Role on the chat-completions wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: WireRole,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<WireMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Number of earlier replies by the requesting agent, plus one.
    pub fn own_round(&self) -> usize {
        self.messages.iter().filter(|m| m.role == WireRole::Assistant).count() + 1
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    /// Timeouts, connection failures, 429 and 5xx responses.
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

/// Anything that can turn a chat request into a reply.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    /// Short identifier recorded in run metadata.
    fn describe(&self) -> String;
}
