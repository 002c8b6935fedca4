use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{message_hash, LlmClient, LlmError, LlmRequest, LlmResponse, Role, ToolCallRequest};
use crate::types::{CallRole, TokenUsage};

/// One canned reply. `fail` = `"transport"` or `"api"` turns it into an error.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScriptedReply {
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCallRequest>,
    #[serde(default)]
    pub usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<String>,
}

impl ScriptedReply {
    pub fn text(text: impl Into<String>) -> Self {
        ScriptedReply {
            text: text.into(),
            ..Default::default()
        }
    }

    pub fn with_usage(mut self, input: u64, output: u64, thinking: u64) -> Self {
        self.usage = TokenUsage::new(input, output, thinking);
        self
    }

    pub fn tools(calls: Vec<ToolCallRequest>) -> Self {
        ScriptedReply {
            tool_calls: calls,
            ..Default::default()
        }
    }

    pub fn fail_transport(msg: impl Into<String>) -> Self {
        ScriptedReply {
            text: msg.into(),
            fail: Some("transport".into()),
            ..Default::default()
        }
    }

    pub fn fail_api(msg: impl Into<String>) -> Self {
        ScriptedReply {
            text: msg.into(),
            fail: Some("api".into()),
            ..Default::default()
        }
    }

    fn into_result(self) -> Result<LlmResponse, LlmError> {
        match self.fail.as_deref() {
            None => Ok(LlmResponse {
                text: self.text,
                tool_calls: self.tool_calls,
                usage: self.usage,
                provider_blocks: None,
            }),
            Some("transport") => Err(LlmError::Transport(self.text)),
            Some(_) => Err(LlmError::Api(self.text)),
        }
    }
}

/// Matches when every `contains` needle occurs in the request's concatenated
/// message contents, and the call role matches if one is given.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default)]
    pub role: Option<CallRole>,
    #[serde(default)]
    pub contains: Vec<String>,
    pub reply: ScriptedReply,
}

/// On-disk script for [`ScriptedLlm`] (JSON).
///
/// Lookup order for each call: `keyed` by [`message_hash`], then the first
/// matching `rules` entry, then the role-specific FIFO queue (`proposer`,
/// `reviewer`, `reflector`), then the shared `responses` queue, then `default`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptFile {
    pub keyed: BTreeMap<String, ScriptedReply>,
    pub rules: Vec<ScriptRule>,
    pub proposer: Vec<ScriptedReply>,
    pub reviewer: Vec<ScriptedReply>,
    pub reflector: Vec<ScriptedReply>,
    pub responses: Vec<ScriptedReply>,
    pub default: Option<ScriptedReply>,
}

impl ScriptFile {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))
    }
}

struct Queues {
    by_role: BTreeMap<CallRole, VecDeque<ScriptedReply>>,
    shared: VecDeque<ScriptedReply>,
    calls: Vec<LlmRequest>,
}

/// Deterministic scripted client. Safe to share between threads; FIFO queues
/// are consumed in call order.
pub struct ScriptedLlm {
    keyed: BTreeMap<String, ScriptedReply>,
    rules: Vec<ScriptRule>,
    default: Option<ScriptedReply>,
    state: Mutex<Queues>,
}

impl ScriptedLlm {
    pub fn new(script: ScriptFile) -> Self {
        let by_role = BTreeMap::from([
            (CallRole::Proposer, script.proposer.into()),
            (CallRole::Reviewer, script.reviewer.into()),
            (CallRole::Reflector, script.reflector.into()),
        ]);
        ScriptedLlm {
            keyed: script.keyed,
            rules: script.rules,
            default: script.default,
            state: Mutex::new(Queues {
                by_role,
                shared: script.responses.into(),
                calls: Vec::new(),
            }),
        }
    }

    /// Plain FIFO of text replies.
    pub fn fifo<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(ScriptFile {
            responses: texts.into_iter().map(ScriptedReply::text).collect(),
            ..Default::default()
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(ScriptFile::load(path)?))
    }

    /// Every request received so far, in order.
    pub fn calls(&self) -> Vec<LlmRequest> {
        self.state.lock().unwrap().calls.clone()
    }

    pub fn remaining(&self) -> usize {
        let q = self.state.lock().unwrap();
        q.shared.len() + q.by_role.values().map(VecDeque::len).sum::<usize>()
    }
}

impl LlmClient for ScriptedLlm {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let mut state = self.state.lock().unwrap();
        state.calls.push(request.clone());
        if !self.keyed.is_empty() {
            if let Some(r) = self.keyed.get(&message_hash(&request.messages)) {
                return r.clone().into_result();
            }
        }
        if !self.rules.is_empty() {
            let haystack: String = request
                .messages
                .iter()
                .map(|m| m.content.as_str())
                .collect::<Vec<_>>()
                .join("\n");
            let hit = self.rules.iter().find(|rule| {
                rule.role.is_none_or(|r| r == request.role)
                    && rule.contains.iter().all(|needle| haystack.contains(needle.as_str()))
            });
            if let Some(rule) = hit {
                return rule.reply.clone().into_result();
            }
        }
        if let Some(r) = state
            .by_role
            .get_mut(&request.role)
            .and_then(VecDeque::pop_front)
        {
            return r.into_result();
        }
        if let Some(r) = state.shared.pop_front() {
            return r.into_result();
        }
        match &self.default {
            Some(r) => r.clone().into_result(),
            None => Err(LlmError::Script(format!(
                "script exhausted ({:?} call)",
                request.role
            ))),
        }
    }
}

/// Client backed by a closure; handy for seed-dependent mocks.
pub struct FnLlm<F>(pub F);

impl<F> LlmClient for FnLlm<F>
where
    F: Fn(&LlmRequest) -> Result<LlmResponse, LlmError> + Send + Sync,
{
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (self.0)(request)
    }
}

/// Zero-configuration mock: the proposer resubmits the target theorem as-is,
/// the reviewer approves, and reflection returns empty notes.
#[derive(Debug, Default, Clone, Copy)]
pub struct EchoLlm;

impl LlmClient for EchoLlm {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let text = match request.role {
            CallRole::Proposer => {
                let target = request
                    .messages
                    .iter()
                    .filter(|m| m.role == Role::User)
                    .find_map(|m| between(&m.content, "<target>\n", "\n</target>"))
                    .unwrap_or_default();
                format!(
                    "reasoning: resubmitting the target unchanged\nimports: []\nopens: []\nupdated_theorem:\n```lean\n{target}\n```"
                )
            }
            CallRole::Reviewer => {
                "check1: True, check2: True, check3: True, approved: True\nreasoning: \"echo reviewer\"".to_string()
            }
            CallRole::Reflector => String::new(),
        };
        Ok(LlmResponse::text(text, TokenUsage::default()))
    }
}

/// Seeded stand-in for a real model: each proposer call succeeds with
/// probability `p_success`, drawn from the request seed and the message
/// history, so a rerun with the same seed repeats exactly. A success swaps the
/// target's body for `omega`; a failure keeps `sorry`. The reviewer always
/// approves and reflection returns a one-line note.
#[derive(Debug, Clone, Copy)]
pub struct CoinFlipLlm {
    pub p_success: f64,
    pub usage: TokenUsage,
}

impl CoinFlipLlm {
    pub fn new(p_success: f64) -> Self {
        CoinFlipLlm {
            p_success,
            usage: TokenUsage::new(1_200, 300, 800),
        }
    }

    fn draw(request: &LlmRequest) -> f64 {
        let digest = Sha256::digest(format!("{:?}:{}", request.seed, message_hash(&request.messages)).as_bytes());
        let x = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        (x >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl LlmClient for CoinFlipLlm {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let text = match request.role {
            CallRole::Proposer => {
                let target = request
                    .messages
                    .iter()
                    .filter(|m| m.role == Role::User)
                    .find_map(|m| between(&m.content, "<target>\n", "\n</target>"))
                    .unwrap_or_default();
                let header = target.rfind(":=").map_or(target.as_str(), |i| &target[..i]).trim_end();
                let body = if Self::draw(request) < self.p_success { "omega" } else { "sorry" };
                format!("reasoning: coin flip\nimports: []\nopens: []\nupdated_theorem:\n```lean\n{header} := by\n  {body}\n```")
            }
            CallRole::Reviewer => "check1: True, check2: True, check3: True, approved: True\nreasoning: ok".to_string(),
            CallRole::Reflector => "- last attempt left goals open; try a decision procedure".to_string(),
        };
        Ok(LlmResponse::text(text, self.usage))
    }
}

fn between(s: &str, start: &str, end: &str) -> Option<String> {
    let i = s.find(start)? + start.len();
    let j = s[i..].find(end)? + i;
    Some(s[i..j].to_string())
}
