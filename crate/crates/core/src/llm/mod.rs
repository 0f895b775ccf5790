//! Chat-completion gateway: one trait, an HTTP adapter for chat-completions
//! endpoints, and a deterministic scripted mock.

mod http;
mod mock;
pub mod sse;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub use http::HttpGateway;
pub use mock::MockGateway;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub max_output_tokens: u32,
    pub temperature: f32,
    pub stream: bool,
}

impl CompletionRequest {
    /// Checks the message invariants every gateway relies on.
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be non-negative".into()));
        }
        for (i, m) in self.messages.iter().enumerate() {
            if m.role == Role::System && i != 0 {
                return Err(GatewayError::InvalidRequest("the system message must come first and only once".into()));
            }
            if m.role != Role::Assistant && m.content.trim().is_empty() {
                return Err(GatewayError::InvalidRequest(format!("message {i} has empty content")));
            }
        }
        Ok(())
    }

    pub fn last_user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionDelta {
    pub text_fragment: String,
    pub is_final: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<FinishReason>,
}

impl CompletionDelta {
    pub fn fragment(text: impl Into<String>) -> Self {
        Self { text_fragment: text.into(), is_final: false, finish_reason: None }
    }

    pub fn last(text: impl Into<String>, reason: FinishReason) -> Self {
        Self { text_fragment: text.into(), is_final: true, finish_reason: Some(reason) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub finish_reason: FinishReason,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("language model provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("language model provider returned {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("completion timed out after {0:?}")]
    Timeout(Duration),
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
}

/// Receives deltas as they arrive.
pub type DeltaSink<'a> = dyn FnMut(&CompletionDelta) + Send + 'a;

#[async_trait]
pub trait LlmGateway: Send + Sync {
    /// Runs a completion, feeding every delta to `sink`. Exactly one delta is
    /// final, and the fragments concatenate to the returned text.
    async fn complete(&self, req: &CompletionRequest, sink: &mut DeltaSink<'_>) -> Result<Completion, GatewayError>;
}

/// Budget-accounting token estimate: whitespace-delimited words × 4/3, rounded up.
pub fn count_tokens(text: &str) -> usize {
    let words = text.split_whitespace().count();
    (words * 4).div_ceil(3)
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_TEMPERATURE: f32 = 0.2;

#[derive(Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub mock: bool,
}

impl std::fmt::Debug for GatewayConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GatewayConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("model", &self.model)
            .field("timeout", &self.timeout)
            .field("mock", &self.mock)
            .finish()
    }
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key: None,
            model: "gpt-4o".into(),
            timeout: DEFAULT_TIMEOUT,
            mock: false,
        }
    }
}

fn truthy(v: &str) -> bool {
    matches!(v.trim().to_ascii_lowercase().as_str(), "1" | "true" | "yes" | "on")
}

impl GatewayConfig {
    /// Reads `LLM_BASE_URL`, `LLM_API_KEY`, `LLM_MODEL`, `LLM_TIMEOUT_SECS` and `MOCK_LLM`.
    pub fn from_env() -> Self {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Self {
        let defaults = Self::default();
        Self {
            base_url: get("LLM_BASE_URL").unwrap_or(defaults.base_url),
            api_key: get("LLM_API_KEY").filter(|k| !k.is_empty()),
            model: get("LLM_MODEL").unwrap_or(defaults.model),
            timeout: get("LLM_TIMEOUT_SECS")
                .and_then(|s| s.parse().ok())
                .map(Duration::from_secs)
                .unwrap_or(defaults.timeout),
            mock: get("MOCK_LLM").is_some_and(|v| truthy(&v)),
        }
    }

    pub fn build(&self) -> Arc<dyn LlmGateway> {
        if self.mock {
            Arc::new(MockGateway::new())
        } else {
            Arc::new(HttpGateway::new(self.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_estimate() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("one two three"), 4);
        assert_eq!(count_tokens(&"word ".repeat(750)), 1000);
        assert_eq!(count_tokens("  a\n\tb  "), 3);
    }

    #[test]
    fn system_message_must_lead() {
        let mut req = CompletionRequest {
            messages: vec![ChatMessage::user("hi"), ChatMessage::system("sys")],
            max_output_tokens: 10,
            temperature: 0.0,
            stream: true,
        };
        assert!(matches!(req.validate(), Err(GatewayError::InvalidRequest(_))));
        req.messages.swap(0, 1);
        assert_eq!(req.validate(), Ok(()));
        req.messages.push(ChatMessage::user("  "));
        assert!(req.validate().is_err());
    }

    #[test]
    fn config_from_lookup() {
        let cfg = GatewayConfig::from_lookup(|k| match k {
            "MOCK_LLM" => Some("1".into()),
            "LLM_TIMEOUT_SECS" => Some("5".into()),
            "LLM_API_KEY" => Some("secret".into()),
            _ => None,
        });
        assert!(cfg.mock);
        assert_eq!(cfg.timeout, Duration::from_secs(5));
        assert!(!format!("{cfg:?}").contains("secret"));
        assert!(!GatewayConfig::from_lookup(|k| (k == "MOCK_LLM").then(|| "0".to_string())).mock);
    }
}
