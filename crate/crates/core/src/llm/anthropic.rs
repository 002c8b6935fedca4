use std::time::Duration;

use serde_json::{json, Value};

use super::{LlmClient, LlmError, LlmRequest, LlmResponse, Role, ToolCallRequest};
use crate::types::{ThinkingBudget, TokenUsage, ToolKind};

const API_VERSION: &str = "2023-06-01";
const DEFAULT_BASE_URL: &str = "https://api.anthropic.com";
/// Room for the visible answer on top of the thinking budget.
const ANSWER_TOKENS: u32 = 16_000;

/// Messages-API client. The key is read from an environment variable only.
pub struct AnthropicClient {
    http: reqwest::blocking::Client,
    base_url: String,
    api_key: String,
}

impl AnthropicClient {
    pub fn from_env(key_var: &str, base_url: Option<&str>) -> Result<Self, LlmError> {
        let api_key = std::env::var(key_var)
            .map_err(|_| LlmError::Credentials(format!("environment variable {key_var} is not set")))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(900))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(AnthropicClient {
            http,
            base_url: base_url.unwrap_or(DEFAULT_BASE_URL).trim_end_matches('/').to_string(),
            api_key,
        })
    }
}

fn tool_schema(tool: ToolKind) -> Value {
    match tool {
        ToolKind::LibrarySearch => json!({
            "name": "library_search",
            "description": "Semantic search over Mathlib declarations. Returns lines of the form `name : statement`.",
            "input_schema": {
                "type": "object",
                "properties": {
                    "query": {"type": "string", "description": "Natural-language or Lean-syntax description of the lemma"},
                    "limit": {"type": "string", "description": "Maximum number of hits"}
                },
                "required": ["query"]
            }
        }),
        ToolKind::WebSearch => json!({
            "name": "web_search",
            "description": "Web search for proof strategies and references.",
            "input_schema": {
                "type": "object",
                "properties": {"query": {"type": "string"}},
                "required": ["query"]
            }
        }),
    }
}

/// Request body for `POST /v1/messages`.
pub(crate) fn request_body(req: &LlmRequest) -> Value {
    let system: Vec<&str> = req
        .messages
        .iter()
        .filter(|m| m.role == Role::System)
        .map(|m| m.content.as_str())
        .collect();
    let mut messages: Vec<Value> = Vec::new();
    for m in req.messages.iter().filter(|m| m.role != Role::System) {
        let (role, block) = match m.role {
            Role::User => ("user", json!({"type": "text", "text": m.content})),
            Role::Tool => (
                "user",
                json!({
                    "type": "tool_result",
                    "tool_use_id": m.tool_call_id.clone().unwrap_or_default(),
                    "content": m.content,
                }),
            ),
            Role::Assistant => {
                if let Some(blocks) = &m.provider_blocks {
                    messages.push(json!({"role": "assistant", "content": blocks}));
                    continue;
                }
                let mut blocks = Vec::new();
                if !m.content.is_empty() {
                    blocks.push(json!({"type": "text", "text": m.content}));
                }
                for c in &m.tool_calls {
                    blocks.push(json!({"type": "tool_use", "id": c.id, "name": c.name, "input": c.arguments}));
                }
                messages.push(json!({"role": "assistant", "content": blocks}));
                continue;
            }
            Role::System => unreachable!(),
        };
        // Consecutive same-role turns are merged; the API requires alternation.
        match messages.last_mut() {
            Some(last) if last["role"] == role => {
                last["content"].as_array_mut().unwrap().push(block);
            }
            _ => messages.push(json!({"role": role, "content": [block]})),
        }
    }
    let mut body = json!({
        "model": req.model,
        "system": system.join("\n\n"),
        "messages": messages,
    });
    let budget = match &req.thinking {
        ThinkingBudget::Tokens(n) => *n,
        ThinkingBudget::Level(l) => match l.as_str() {
            "minimal" | "off" => 0,
            "low" => 2_000,
            "medium" => 10_000,
            _ => 32_000,
        },
    };
    if budget >= 1_024 {
        body["thinking"] = json!({"type": "enabled", "budget_tokens": budget});
    }
    body["max_tokens"] = json!(budget + ANSWER_TOKENS);
    if !req.tools.is_empty() {
        body["tools"] = Value::Array(req.tools.iter().map(|t| tool_schema(*t)).collect());
    } else {
        // A history with tool_use blocks must still declare those tools; forbid
        // further calls instead.
        let mut used: Vec<ToolKind> = req
            .messages
            .iter()
            .flat_map(|m| m.tool_calls.iter().filter_map(ToolCallRequest::kind))
            .collect();
        used.sort();
        used.dedup();
        if !used.is_empty() {
            body["tools"] = Value::Array(used.iter().map(|t| tool_schema(*t)).collect());
            body["tool_choice"] = json!({"type": "none"});
        }
    }
    body
}

pub(crate) fn parse_response(v: &Value) -> Result<LlmResponse, LlmError> {
    let content = v["content"]
        .as_array()
        .ok_or_else(|| LlmError::Api(format!("response without content: {v}")))?;
    let mut text = String::new();
    let mut tool_calls = Vec::new();
    for block in content {
        match block["type"].as_str() {
            Some("text") => text.push_str(block["text"].as_str().unwrap_or_default()),
            Some("tool_use") => {
                let arguments = block["input"]
                    .as_object()
                    .map(|o| {
                        o.iter()
                            .map(|(k, v)| {
                                let s = v.as_str().map_or_else(|| v.to_string(), str::to_string);
                                (k.clone(), s)
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                tool_calls.push(ToolCallRequest {
                    id: block["id"].as_str().unwrap_or_default().to_string(),
                    name: block["name"].as_str().unwrap_or_default().to_string(),
                    arguments,
                });
            }
            _ => {}
        }
    }
    let usage = TokenUsage::new(
        v["usage"]["input_tokens"].as_u64().unwrap_or(0),
        v["usage"]["output_tokens"].as_u64().unwrap_or(0),
        0,
    );
    Ok(LlmResponse {
        text,
        tool_calls,
        usage,
        provider_blocks: Some(v["content"].clone()),
    })
}

impl LlmClient for AnthropicClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let resp = self
            .http
            .post(format!("{}/v1/messages", self.base_url))
            .header("x-api-key", &self.api_key)
            .header("anthropic-version", API_VERSION)
            .json(&request_body(request))
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let body: Value = resp.json().map_err(|e| LlmError::Transport(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(LlmError::Transport(format!("{status}: {body}")));
        }
        if !status.is_success() {
            return Err(LlmError::Api(format!("{status}: {body}")));
        }
        parse_response(&body)
    }
}
