//! Prompt assembly, the single tool round, and proposal parsing.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use crate::llm::{LlmClient, LlmError, LlmRequest, LlmResponse, Message};
use crate::prompts;
use crate::toolbox::Toolbox;
use crate::types::{CallRole, ModelUsage, PromptMode, ProofProposal, ProverConfig, TheoremTask};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("missing updated_theorem")]
    MissingTheorem,
    #[error("empty updated_theorem")]
    EmptyTheorem,
}

#[derive(Debug, thiserror::Error)]
pub enum ProposerError {
    #[error("LLM unavailable: {0}")]
    LlmUnavailable(#[from] LlmError),
}

/// System prompt, task prompt, then one user message per memory fragment.
pub fn assemble_messages(task: &TheoremTask, memory: &[String], mode: PromptMode, lean_version: &str) -> Vec<Message> {
    let mut msgs = vec![
        Message::system(prompts::proposer_system(mode, lean_version)),
        Message::user(prompts::proposer_user(&task.target_theorem, &task.file_content)),
    ];
    msgs.extend(memory.iter().filter(|f| !f.is_empty()).map(Message::user));
    msgs
}

pub const REFUSED_OVER_LIMIT: &str = "refused: too many tool calls in one round";
pub const REFUSED_SECOND_ROUND: &str =
    "refused: only one round of tool calls is allowed; reply now with the final structured answer";

#[derive(Debug, Clone)]
pub struct ProposeOutput {
    pub proposal: Result<ProofProposal, ParseError>,
    /// Every proposer call, in order.
    pub usage: Vec<ModelUsage>,
    /// 0 or 1.
    pub tool_rounds: usize,
    /// Tool calls that were refused (over the per-round limit or in a second round).
    pub refused_calls: usize,
    /// Full conversation including the final reply.
    pub messages: Vec<Message>,
    pub raw_output: String,
}

fn assistant_turn(resp: &LlmResponse) -> Message {
    let mut m = Message::assistant(resp.text.clone());
    m.tool_calls = resp.tool_calls.clone();
    m.provider_blocks = resp.provider_blocks.clone();
    m
}

/// One proposer pass: an optional single round of parallel tool calls, then
/// the final answer. A second tool request is refused and the model is asked
/// once more with tools withdrawn.
pub fn propose(
    task: &TheoremTask,
    memory: &[String],
    config: &ProverConfig,
    llm: &dyn LlmClient,
    toolbox: &Toolbox,
) -> Result<ProposeOutput, ProposerError> {
    let mut messages = assemble_messages(task, memory, config.mode, &config.lean_version);
    let tools = toolbox.available(&config.tools_enabled);
    let mut usage = Vec::new();
    let mut call = |messages: &[Message], offer_tools: bool| -> Result<LlmResponse, LlmError> {
        let req = LlmRequest {
            model: config.model.clone(),
            role: CallRole::Proposer,
            messages: messages.to_vec(),
            tools: if offer_tools { tools.clone() } else { Vec::new() },
            thinking: config.thinking_budget.clone(),
            seed: config.sampling_seed,
        };
        let resp = llm.complete(&req)?;
        usage.push(ModelUsage {
            model: config.model.clone(),
            role: CallRole::Proposer,
            tokens: resp.usage,
        });
        Ok(resp)
    };

    let mut resp = call(&messages, !tools.is_empty())?;
    let mut tool_rounds = 0;
    let mut refused_calls = 0;
    if !resp.tool_calls.is_empty() {
        tool_rounds = 1;
        let limit = config.max_tool_calls;
        let (run, over) = resp.tool_calls.split_at(resp.tool_calls.len().min(limit));
        let results = toolbox.run_round(run, &config.tools_enabled);
        messages.push(assistant_turn(&resp));
        for (req, out) in run.iter().zip(results) {
            messages.push(Message::tool_result(req.id.clone(), out));
        }
        for req in over {
            messages.push(Message::tool_result(req.id.clone(), REFUSED_OVER_LIMIT));
        }
        refused_calls += over.len();
        resp = call(&messages, false)?;
        if !resp.tool_calls.is_empty() {
            messages.push(assistant_turn(&resp));
            for req in &resp.tool_calls {
                messages.push(Message::tool_result(req.id.clone(), REFUSED_SECOND_ROUND));
            }
            refused_calls += resp.tool_calls.len();
            resp = call(&messages, false)?;
        }
    }
    messages.push(assistant_turn(&resp));
    let proposal = if resp.tool_calls.is_empty() || !resp.text.trim().is_empty() {
        parse_proposal(&resp.text)
    } else {
        Err(ParseError::MissingTheorem)
    };
    Ok(ProposeOutput {
        proposal,
        usage,
        tool_rounds,
        refused_calls,
        messages,
        raw_output: resp.text,
    })
}

fn fence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z0-9_-]*[ \t]*\n(.*?)\n[ \t]*```").unwrap())
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^[ \t]*(?:[-#>]+[ \t]*)?\**[ \t]*(reasoning|imports|opens|updated_theorem|updated theorem)[ \t]*\**[ \t]*:[ \t]*\**[ \t]*(.*)$")
            .unwrap()
    })
}

/// Contents of the first fenced block, or the trimmed text.
fn unfence(s: &str) -> String {
    match fence_re().captures(s) {
        Some(c) => c[1].to_string(),
        None => s.trim().trim_matches('`').trim().to_string(),
    }
}

fn string_list(v: &Value) -> Vec<String> {
    match v {
        Value::Array(items) => items
            .iter()
            .filter_map(|i| i.as_str().map(str::to_string))
            .collect(),
        Value::String(s) => parse_list(s),
        _ => Vec::new(),
    }
}

fn from_json(text: &str) -> Option<Result<ProofProposal, ParseError>> {
    let trimmed = text.trim();
    let mut candidates: Vec<&str> = fence_re()
        .captures_iter(text)
        .filter_map(|c| c.get(1))
        .map(|m| m.as_str())
        .collect();
    candidates.push(trimmed);
    if let (Some(a), Some(b)) = (trimmed.find('{'), trimmed.rfind('}')) {
        if a < b {
            candidates.push(&trimmed[a..=b]);
        }
    }
    for c in candidates {
        let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(c.trim()) else {
            continue;
        };
        let Some(thm) = obj.get("updated_theorem") else {
            continue;
        };
        let thm = unfence(thm.as_str().unwrap_or_default());
        if thm.trim().is_empty() {
            return Some(Err(ParseError::EmptyTheorem));
        }
        let mut p = ProofProposal {
            reasoning: obj.get("reasoning").and_then(Value::as_str).unwrap_or_default().trim().to_string(),
            imports: obj.get("imports").map(string_list).unwrap_or_default(),
            opens: obj.get("opens").map(string_list).unwrap_or_default(),
            updated_theorem: thm,
        };
        p.normalize();
        return Some(Ok(p));
    }
    None
}

/// Reads `[]`, `["A", "B"]`, `[A, B]`, `A, B` or `- A` bullet lines.
fn parse_list(s: &str) -> Vec<String> {
    let s = s.trim();
    if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(s) {
        return string_list(&Value::Array(items));
    }
    s.trim_start_matches('[')
        .trim_end_matches(']')
        .split([',', '\n'])
        .map(|item| item.trim().trim_start_matches(['-', '*']).trim())
        .map(|item| item.trim_matches(|c| c == '"' || c == '\'' || c == '`').trim())
        .filter(|item| !item.is_empty() && !item.eq_ignore_ascii_case("none"))
        .map(str::to_string)
        .collect()
}

/// Extracts the four output fields, from a JSON object or from
/// `field: value` headers (optionally bolded). A fenced block in
/// `updated_theorem` is unwrapped.
pub fn parse_proposal(raw: &str) -> Result<ProofProposal, ParseError> {
    if let Some(r) = from_json(raw) {
        return r;
    }
    let lines: Vec<&str> = raw.lines().collect();
    let mut headers: Vec<(usize, String, String)> = Vec::new();
    let mut in_fence = false;
    for (i, line) in lines.iter().enumerate() {
        if line.trim_start().starts_with("```") {
            in_fence = !in_fence;
            continue;
        }
        if in_fence {
            continue;
        }
        if let Some(c) = header_re().captures(line) {
            let key = c[1].to_ascii_lowercase().replace(' ', "_");
            headers.push((i, key, c[2].to_string()));
        }
    }
    let section = |k: usize| -> String {
        let (start, _, inline) = &headers[k];
        let end = headers.get(k + 1).map_or(lines.len(), |h| h.0);
        let mut text = inline.trim_end_matches('*').trim().to_string();
        for l in &lines[start + 1..end] {
            text.push('\n');
            text.push_str(l);
        }
        text.trim().to_string()
    };
    let find = |key: &str| headers.iter().position(|h| h.1 == key);

    let thm_idx = find("updated_theorem").ok_or(ParseError::MissingTheorem)?;
    let updated_theorem = unfence(&section(thm_idx));
    if updated_theorem.trim().is_empty() {
        return Err(ParseError::EmptyTheorem);
    }
    let reasoning = match find("reasoning") {
        Some(k) => section(k),
        None => lines[..headers[0].0].join("\n").trim().to_string(),
    };
    let mut p = ProofProposal {
        reasoning,
        imports: find("imports").map(|k| parse_list(&section(k))).unwrap_or_default(),
        opens: find("opens").map(|k| parse_list(&section(k))).unwrap_or_default(),
        updated_theorem,
    };
    p.normalize();
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ScriptFile, ScriptedLlm, ScriptedReply, ToolCallRequest};
    use crate::toolbox::{MockLibrarySearch, MockWebSearch, WebHit, WebScript, TOOL_DISABLED};
    use crate::types::ToolKind;
    use std::sync::Arc;

    const TARGET: &str = "theorem add_zero (n : Nat) : n + 0 = n := sorry";

    fn task() -> TheoremTask {
        TheoremTask::new("add_zero", TARGET, format!("import Mathlib\n\n{TARGET}\n")).unwrap()
    }

    const ANSWER: &str = "reasoning: use omega\nimports: [\"Mathlib.Tactic\"]\nopens: []\nupdated_theorem:\n```lean\ntheorem add_zero (n : Nat) : n + 0 = n := by\n  omega\n```";

    #[test]
    fn single_shot_first_call_shape() {
        let m = assemble_messages(&task(), &[], PromptMode::SingleShot, "4.24");
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].content, prompts::proposer_system(PromptMode::SingleShot, "4.24"));
        assert!(m[1].content.contains(&format!("<target>\n{TARGET}\n</target>")));
        assert!(m[1].content.contains("<complete-file>\n```lean\nimport Mathlib"));
    }

    #[test]
    fn experience_is_last() {
        let frag = prompts::experience("lemma X wrong name");
        let m = assemble_messages(&task(), std::slice::from_ref(&frag), PromptMode::Iterative, "4.24");
        assert_eq!(m.len(), 3);
        assert_eq!(m[2].content, frag);
        assert!(m[2].content.contains("lemma X wrong name"));
    }

    #[test]
    fn parse_template_example() {
        let p = parse_proposal(ANSWER).unwrap();
        assert_eq!(p.reasoning, "use omega");
        assert_eq!(p.imports, vec!["Mathlib.Tactic"]);
        assert!(p.opens.is_empty());
        assert_eq!(p.updated_theorem, "theorem add_zero (n : Nat) : n + 0 = n := by\n  omega");
    }

    #[test]
    fn parse_bold_headers_and_free_reasoning() {
        let raw = "The goal is linear arithmetic.\n\n**imports**: [Mathlib.Tactic, Mathlib.Data.Nat.Basic]\n**opens**:\n- Nat\n**updated_theorem**:\n```lean\ntheorem t : True := by\n  -- imports: not a header inside the fence\n  trivial\n```\n";
        let p = parse_proposal(raw).unwrap();
        assert_eq!(p.reasoning, "The goal is linear arithmetic.");
        assert_eq!(p.imports, vec!["Mathlib.Tactic", "Mathlib.Data.Nat.Basic"]);
        assert_eq!(p.opens, vec!["Nat"]);
        assert!(p.updated_theorem.contains("-- imports: not a header"));
    }

    #[test]
    fn parse_theorem_only() {
        let p = parse_proposal("updated_theorem: theorem t : True := trivial").unwrap();
        assert!(p.imports.is_empty() && p.opens.is_empty());
        assert_eq!(p.updated_theorem, "theorem t : True := trivial");
    }

    #[test]
    fn parse_missing_or_empty() {
        assert_eq!(parse_proposal("reasoning: hmm\nimports: []"), Err(ParseError::MissingTheorem));
        assert_eq!(parse_proposal("updated_theorem:\n```lean\n\n```"), Err(ParseError::EmptyTheorem));
        assert_eq!(parse_proposal(""), Err(ParseError::MissingTheorem));
    }

    #[test]
    fn parse_json() {
        let raw = "```json\n{\"reasoning\": \"r\", \"imports\": [\"import Mathlib.Tactic\", \"Mathlib.Tactic\"], \"opens\": [], \"updated_theorem\": \"```lean\\ntheorem t : True := trivial\\n```\"}\n```";
        let p = parse_proposal(raw).unwrap();
        assert_eq!(p.imports, vec!["Mathlib.Tactic"]);
        assert_eq!(p.updated_theorem, "theorem t : True := trivial");
    }

    #[test]
    fn lean_braces_do_not_confuse_json_probe() {
        let raw = "updated_theorem:\n```lean\ntheorem t {x : Nat} : x = x := rfl\n```";
        assert_eq!(parse_proposal(raw).unwrap().updated_theorem, "theorem t {x : Nat} : x = x := rfl");
    }

    fn tools_config() -> ProverConfig {
        ProverConfig {
            tools_enabled: [ToolKind::LibrarySearch, ToolKind::WebSearch].into(),
            ..Default::default()
        }
    }

    fn toolbox() -> Toolbox {
        let mut script = WebScript::default();
        script.hits.insert(
            "Putnam 1962 A1".into(),
            vec![WebHit {
                title: "T".into(),
                url: "https://example.org".into(),
                snippet: "s".into(),
            }],
        );
        Toolbox::disabled()
            .with_library(Arc::new(MockLibrarySearch::nat_sample()))
            .with_web(Arc::new(MockWebSearch::new(script)))
    }

    #[test]
    fn passthrough_without_tools() {
        let llm = ScriptedLlm::fifo([ANSWER]);
        let out = propose(&task(), &[], &ProverConfig::default(), &llm, &Toolbox::disabled()).unwrap();
        assert_eq!(out.proposal.unwrap(), parse_proposal(ANSWER).unwrap());
        assert_eq!(out.tool_rounds, 0);
        assert!(llm.calls()[0].tools.is_empty());
    }

    #[test]
    fn one_tool_round_then_answer() {
        let llm = ScriptedLlm::new(ScriptFile {
            responses: vec![
                ScriptedReply::tools(vec![
                    ToolCallRequest::new("a", ToolKind::LibrarySearch, "add_comm"),
                    ToolCallRequest::new("b", ToolKind::WebSearch, "Putnam 1962 A1"),
                ])
                .with_usage(10, 5, 2),
                ScriptedReply::text(ANSWER).with_usage(20, 7, 3),
            ],
            ..Default::default()
        });
        let out = propose(&task(), &[], &tools_config(), &llm, &toolbox()).unwrap();
        assert_eq!(out.tool_rounds, 1);
        assert_eq!(out.refused_calls, 0);
        assert!(out.proposal.is_ok());
        let tool_msgs: Vec<&Message> = out.messages.iter().filter(|m| m.tool_call_id.is_some()).collect();
        assert_eq!(tool_msgs.len(), 2);
        assert_eq!(tool_msgs[0].tool_call_id.as_deref(), Some("a"));
        assert!(tool_msgs[0].content.starts_with("Nat.add_comm"));
        assert!(tool_msgs[1].content.starts_with("T (https://example.org)"));
        let calls = llm.calls();
        assert_eq!(calls.len(), 2);
        assert_eq!(calls[0].tools, vec![ToolKind::LibrarySearch, ToolKind::WebSearch]);
        assert!(calls[1].tools.is_empty());
        let totals: Vec<u64> = out.usage.iter().map(|u| u.tokens.total()).collect();
        assert_eq!(totals, vec![17, 30]);
    }

    #[test]
    fn second_tool_request_is_refused() {
        let again = || ScriptedReply::tools(vec![ToolCallRequest::new("c", ToolKind::LibrarySearch, "x")]);
        let llm = ScriptedLlm::new(ScriptFile {
            responses: vec![again(), again(), ScriptedReply::text(ANSWER)],
            ..Default::default()
        });
        let out = propose(&task(), &[], &tools_config(), &llm, &toolbox()).unwrap();
        assert_eq!(out.tool_rounds, 1);
        assert_eq!(out.refused_calls, 1);
        assert!(out.messages.iter().any(|m| m.content == REFUSED_SECOND_ROUND));
        assert!(out.proposal.is_ok());
        assert_eq!(llm.calls().len(), 3);
    }

    #[test]
    fn persistent_tool_requests_become_malformed() {
        let again = || ScriptedReply::tools(vec![ToolCallRequest::new("c", ToolKind::LibrarySearch, "x")]);
        let llm = ScriptedLlm::new(ScriptFile {
            responses: vec![again(), again(), again()],
            ..Default::default()
        });
        let out = propose(&task(), &[], &tools_config(), &llm, &toolbox()).unwrap();
        assert_eq!(out.proposal, Err(ParseError::MissingTheorem));
        assert_eq!(llm.calls().len(), 3);
    }

    #[test]
    fn over_limit_calls_refused_and_disabled_tools_answered() {
        let mut cfg = tools_config();
        cfg.max_tool_calls = 1;
        cfg.tools_enabled = [ToolKind::WebSearch].into();
        let llm = ScriptedLlm::new(ScriptFile {
            responses: vec![
                ScriptedReply::tools(vec![
                    ToolCallRequest::new("a", ToolKind::LibrarySearch, "add_comm"),
                    ToolCallRequest::new("b", ToolKind::WebSearch, "Putnam 1962 A1"),
                ]),
                ScriptedReply::text(ANSWER),
            ],
            ..Default::default()
        });
        let out = propose(&task(), &[], &cfg, &llm, &toolbox()).unwrap();
        let results: Vec<&str> = out
            .messages
            .iter()
            .filter(|m| m.tool_call_id.is_some())
            .map(|m| m.content.as_str())
            .collect();
        assert_eq!(results, vec![TOOL_DISABLED, REFUSED_OVER_LIMIT]);
        assert_eq!(llm.calls()[0].tools, vec![ToolKind::WebSearch]);
    }

    #[test]
    fn llm_failure_is_an_error() {
        let llm = ScriptedLlm::fifo(Vec::<String>::new());
        assert!(propose(&task(), &[], &ProverConfig::default(), &llm, &Toolbox::disabled()).is_err());
    }
}
