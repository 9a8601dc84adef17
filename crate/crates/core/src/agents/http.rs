//! Live chat backends: a chat-completions endpoint and a local-runner `/api/chat` endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, ChatBackend, ChatRequest, WireMessage};
use crate::net::{self, RateLimiter};

pub const ENV_API_BASE: &str = "AFFECTSIM_API_BASE";
pub const ENV_API_KEY: &str = "AFFECTSIM_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpChatConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub requests_per_second: Option<f64>,
}

impl HttpChatConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            requests_per_second: None,
        }
    }

    /// Reads the base URL and optional key from the environment.
    pub fn from_env() -> Option<Self> {
        let base = std::env::var(ENV_API_BASE).ok().filter(|s| !s.is_empty())?;
        let mut cfg = Self::new(base);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty());
        Some(cfg)
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    messages: &'a [WireMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Serialize)]
struct LocalBody<'a> {
    model: &'a str,
    messages: &'a [WireMessage],
    stream: bool,
}

#[derive(Deserialize)]
struct LocalResponse {
    message: ReplyMessage,
}

fn post_json<B: Serialize>(
    agent: &ureq::Agent,
    url: &str,
    api_key: Option<&str>,
    body: &B,
) -> Result<String, BackendError> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(net::classify)?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(net::classify)?;
    if !(200..300).contains(&status) {
        return Err(net::classify_status(status, &text));
    }
    Ok(text)
}

/// Backend for chat-completions-compatible servers.
pub struct OpenAiCompatBackend {
    config: HttpChatConfig,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl OpenAiCompatBackend {
    pub fn new(config: HttpChatConfig) -> Self {
        Self {
            agent: net::agent(config.timeout),
            limiter: RateLimiter::new(config.requests_per_second),
            config,
        }
    }
}

impl ChatBackend for OpenAiCompatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.limiter.wait();
        let url = net::join_url(&self.config.base_url, "/chat/completions");
        let body = CompletionBody {
            model: &request.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let raw = post_json(&self.agent, &url, self.config.api_key.as_deref(), &body)?;
        let parsed: CompletionResponse = serde_json::from_str(&raw)
            .map_err(|e| BackendError::Fatal(format!("unparsable completion: {e}")))?;
        Ok(parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default())
    }

    fn describe(&self) -> String {
        format!("openai-compat:{}", self.config.base_url)
    }
}

/// Backend for local model runners exposing `POST /api/chat`.
pub struct LocalRunnerBackend {
    config: HttpChatConfig,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl LocalRunnerBackend {
    pub fn new(config: HttpChatConfig) -> Self {
        Self {
            agent: net::agent(config.timeout),
            limiter: RateLimiter::new(config.requests_per_second),
            config,
        }
    }
}

impl ChatBackend for LocalRunnerBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.limiter.wait();
        let url = net::join_url(&self.config.base_url, "/api/chat");
        let body = LocalBody {
            model: &request.model,
            messages: &request.messages,
            stream: false,
        };
        let raw = post_json(&self.agent, &url, self.config.api_key.as_deref(), &body)?;
        let parsed: LocalResponse = serde_json::from_str(&raw)
            .map_err(|e| BackendError::Fatal(format!("unparsable chat reply: {e}")))?;
        Ok(parsed.message.content.unwrap_or_default())
    }

    fn describe(&self) -> String {
        format!("local-runner:{}", self.config.base_url)
    }
}
