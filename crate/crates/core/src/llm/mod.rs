//! Chat-completion clients.
//!
//! Every model call in the crate goes through [`LlmClient`]. Tests and the
//! default CLI profile use [`ScriptedLlm`] or [`EchoLlm`]; real runs use
//! [`AnthropicClient`]. Wrap any client in [`RetryingClient`] to get bounded
//! retries on transport failures.

mod anthropic;
mod scripted;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::types::{CallRole, ThinkingBudget, TokenUsage, ToolKind};

pub use anthropic::AnthropicClient;
pub use scripted::{CoinFlipLlm, EchoLlm, FnLlm, ScriptFile, ScriptRule, ScriptedLlm, ScriptedReply};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

/// A tool invocation requested by the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCallRequest {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub arguments: BTreeMap<String, String>,
}

impl ToolCallRequest {
    pub fn new(id: impl Into<String>, tool: ToolKind, query: impl Into<String>) -> Self {
        ToolCallRequest {
            id: id.into(),
            name: tool.name().to_string(),
            arguments: BTreeMap::from([("query".to_string(), query.into())]),
        }
    }

    pub fn kind(&self) -> Option<ToolKind> {
        ToolKind::from_name(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCallRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    /// Provider-native content blocks to replay verbatim (thinking signatures).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_blocks: Option<serde_json::Value>,
}

impl Message {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
            provider_blocks: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Message {
            tool_call_id: Some(call_id.into()),
            ..Self::plain(Role::Tool, content)
        }
    }
}

/// Hex SHA-256 of a message sequence; the key used by keyed scripts.
pub fn message_hash(messages: &[Message]) -> String {
    let bytes = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub role: CallRole,
    pub messages: Vec<Message>,
    /// Tools offered for this call; empty means none.
    pub tools: Vec<ToolKind>,
    pub thinking: ThinkingBudget,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub tool_calls: Vec<ToolCallRequest>,
    pub usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_blocks: Option<serde_json::Value>,
}

impl LlmResponse {
    pub fn text(text: impl Into<String>, usage: TokenUsage) -> Self {
        LlmResponse {
            text: text.into(),
            usage,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    /// Network or 5xx/429-style failures; retried.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider error: {0}")]
    Api(String),
    #[error("script error: {0}")]
    Script(String),
    #[error("missing credentials: {0}")]
    Credentials(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_))
    }
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

impl<T: LlmClient + ?Sized> LlmClient for Arc<T> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            base_delay: Duration::ZERO,
        }
    }
}

/// Retries transport errors with exponential backoff; other errors pass through.
pub struct RetryingClient<C> {
    inner: C,
    policy: RetryPolicy,
}

impl<C: LlmClient> RetryingClient<C> {
    pub fn new(inner: C, policy: RetryPolicy) -> Self {
        RetryingClient { inner, policy }
    }
}

impl<C: LlmClient> LlmClient for RetryingClient<C> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let mut delay = self.policy.base_delay;
        let mut attempt = 1;
        loop {
            match self.inner.complete(request) {
                Err(e) if e.is_retryable() && attempt < self.policy.attempts.max(1) => {
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(LlmError::Transport(msg)) => {
                    return Err(LlmError::Transport(format!(
                        "{msg} (gave up after {attempt} attempts)"
                    )))
                }
                other => return other,
            }
        }
    }
}
