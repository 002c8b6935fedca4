//! Turns a proposal into either build feedback or a reviewer verdict.
//!
//! The pipeline is assemble, strip sorries, build, then (only for a clean
//! build) the deterministic loophole and statement checks followed by the
//! reviewer LLM.

mod candidate;
mod checks;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::leanenv::{extract_goal_states, BuildJob, LeanBackend, LeanError};
use crate::llm::{LlmClient, LlmError, LlmRequest, Message};
use crate::prompts;
use crate::types::{
    AttemptStatus, BuildFeedback, CallRole, ModelUsage, ProofProposal, ProverConfig, ReviewVerdict, TheoremTask,
};

pub use candidate::{assemble_candidate, strip_sorries, CandidateFile};
pub use checks::{
    check_statement_preserved, default_denylist, detect_loopholes, proposal_source, LoopholeReport, Violation,
    AXIOM_KIND, PLACEHOLDER_KINDS,
};

/// File name of the candidate inside its scratch directory.
pub const CANDIDATE_FILE: &str = "Main.lean";

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("target theorem not found in the task file")]
    TargetNotFound,
    #[error("no theorem header found")]
    MalformedTheorem,
    #[error("build error: {0}")]
    Lean(#[from] LeanError),
    #[error("reviewer call failed: {0}")]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReviewResult {
    Build(BuildFeedback),
    Verdict(ReviewVerdict),
}

impl ReviewResult {
    pub fn render(&self) -> String {
        match self {
            ReviewResult::Build(f) => f.render(),
            ReviewResult::Verdict(v) => v.render(),
        }
    }

    pub fn status(&self) -> AttemptStatus {
        match self {
            ReviewResult::Build(f) if f.compiled && !f.goal_states.is_empty() => AttemptStatus::Incomplete,
            ReviewResult::Build(_) => AttemptStatus::BuildFailed,
            ReviewResult::Verdict(v) if v.approved => AttemptStatus::Approved,
            ReviewResult::Verdict(_) => AttemptStatus::Rejected,
        }
    }

    pub fn is_approved(&self) -> bool {
        matches!(self, ReviewResult::Verdict(v) if v.approved)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewOutcome {
    pub result: ReviewResult,
    /// Assembled candidate, before stripping.
    pub source: String,
    /// Present when the reviewer LLM was called.
    pub usage: Option<ModelUsage>,
    /// Seconds waited for a build slot.
    pub queue_wait: f64,
}

/// Deterministic part of the review, computed on the proposal text alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicChecks {
    pub statement_preserved: bool,
    pub loopholes: LoopholeReport,
}

impl DeterministicChecks {
    pub fn run(task: &TheoremTask, proposal: &ProofProposal, denylist: &[String]) -> Result<Self, ReviewError> {
        let statement_preserved = match check_statement_preserved(&task.target_theorem, &proposal.updated_theorem) {
            Ok(b) => b,
            // The original was validated; a headerless proposal just changed the statement.
            Err(ReviewError::MalformedTheorem) if lexer_has_header(&task.target_theorem) => false,
            Err(e) => return Err(e),
        };
        let mut p = proposal.clone();
        p.normalize();
        let loopholes = detect_loopholes(&proposal_source(&p.imports, &p.opens, &p.updated_theorem), denylist);
        Ok(DeterministicChecks {
            statement_preserved,
            loopholes,
        })
    }

    pub fn no_sorry(&self) -> bool {
        self.loopholes.placeholders().next().is_none()
    }

    pub fn no_other_issues(&self) -> bool {
        self.loopholes.others().next().is_none()
    }

    pub fn passed(&self) -> bool {
        self.statement_preserved && self.loopholes.is_clean()
    }

    /// Verdict used when a deterministic check fails and the LLM is skipped.
    pub fn verdict(&self) -> ReviewVerdict {
        let mut reasons = Vec::new();
        if !self.statement_preserved {
            reasons.push("theorem statement was modified".to_string());
        }
        reasons.extend(self.loopholes.violations.iter().map(Violation::describe));
        ReviewVerdict::new(
            self.statement_preserved,
            self.no_sorry(),
            self.no_other_issues(),
            false,
            reasons.join("; "),
        )
    }
}

fn lexer_has_header(src: &str) -> bool {
    crate::lexer::theorem_name(src).is_some()
}

/// The reviewer LLM's answer before it is combined with the deterministic checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewerAnswer {
    pub check1: bool,
    pub check2: bool,
    pub check3: bool,
    pub approved: bool,
    pub reasoning: String,
}

fn as_bool(v: &serde_json::Value) -> Option<bool> {
    match v {
        serde_json::Value::Bool(b) => Some(*b),
        serde_json::Value::String(s) => parse_bool(s),
        _ => None,
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" => Some(true),
        "false" | "no" => Some(false),
        _ => None,
    }
}

fn from_json(text: &str) -> Option<ReviewerAnswer> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    let v: serde_json::Value = serde_json::from_str(text.get(start..=end)?).ok()?;
    let get = |k: &str| v.get(k).and_then(as_bool);
    let (c1, c2, c3) = (get("check1")?, get("check2")?, get("check3")?);
    Some(ReviewerAnswer {
        check1: c1,
        check2: c2,
        check3: c3,
        approved: get("approved").unwrap_or(c1 && c2 && c3),
        reasoning: v.get("reasoning").and_then(|r| r.as_str()).unwrap_or("").to_string(),
    })
}

fn field_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(check1|check2|check3|approved)\**\s*[:=]\s*\**\s*(true|false)\b").unwrap())
}

fn reasoning_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)\breasoning\**\s*:\s*(.*)$").unwrap())
}

/// Reads `check1: True, check2: ..., approved: ...` lines (the reviewer
/// prompt's example format) or a JSON object with the same keys.
pub fn parse_reviewer_output(text: &str) -> Result<ReviewerAnswer, String> {
    if let Some(a) = from_json(text) {
        return Ok(a);
    }
    let mut vals: [Option<bool>; 4] = [None; 4];
    for cap in field_re().captures_iter(text) {
        let idx = match cap[1].to_ascii_lowercase().as_str() {
            "check1" => 0,
            "check2" => 1,
            "check3" => 2,
            _ => 3,
        };
        vals[idx] = vals[idx].or(parse_bool(&cap[2]));
    }
    let missing: Vec<&str> = ["check1", "check2", "check3"]
        .iter()
        .zip(&vals)
        .filter(|(_, v)| v.is_none())
        .map(|(k, _)| *k)
        .collect();
    if !missing.is_empty() {
        return Err(format!("missing {}", missing.join(", ")));
    }
    let (c1, c2, c3) = (vals[0].unwrap(), vals[1].unwrap(), vals[2].unwrap());
    let reasoning = reasoning_re()
        .captures(text)
        .map(|c| c[1].trim().trim_matches('"').trim().to_string())
        .unwrap_or_default();
    Ok(ReviewerAnswer {
        check1: c1,
        check2: c2,
        check3: c3,
        approved: vals[3].unwrap_or(c1 && c2 && c3),
        reasoning,
    })
}

/// Calls the reviewer LLM and combines its answer with the deterministic checks.
pub fn llm_review(
    task: &TheoremTask,
    proposal: &ProofProposal,
    det: &DeterministicChecks,
    llm: &dyn LlmClient,
    config: &ProverConfig,
) -> Result<(ReviewVerdict, ModelUsage), ReviewError> {
    let request = LlmRequest {
        model: config.reviewer_model().to_string(),
        role: CallRole::Reviewer,
        messages: vec![
            Message::system(prompts::REVIEWER_SYSTEM),
            Message::user(prompts::reviewer_user(&task.target_theorem, &proposal.updated_theorem)),
        ],
        tools: Vec::new(),
        thinking: config.thinking_budget.clone(),
        seed: config.sampling_seed,
    };
    let response = llm.complete(&request)?;
    let usage = ModelUsage {
        model: request.model,
        role: CallRole::Reviewer,
        tokens: response.usage,
    };
    let verdict = match parse_reviewer_output(&response.text) {
        Ok(a) => ReviewVerdict::new(
            det.statement_preserved && a.check1,
            det.no_sorry() && a.check2,
            det.no_other_issues() && a.check3,
            a.approved,
            a.reasoning,
        ),
        Err(why) => ReviewVerdict::new(
            det.statement_preserved,
            det.no_sorry(),
            det.no_other_issues(),
            false,
            format!("reviewer output unreadable ({why})"),
        ),
    };
    Ok((verdict, usage))
}

static SCRATCH_COUNTER: AtomicU64 = AtomicU64::new(0);

/// A scratch directory name unique within this process.
pub fn scratch_name(task_id: &str) -> String {
    let clean: String = task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let n = SCRATCH_COUNTER.fetch_add(1, Ordering::Relaxed);
    format!("{clean}_{n}")
}

/// Runs the whole review pipeline for one proposal.
pub fn review_proposal(
    task: &TheoremTask,
    proposal: &ProofProposal,
    lean: &dyn LeanBackend,
    llm: &dyn LlmClient,
    config: &ProverConfig,
) -> Result<ReviewOutcome, ReviewError> {
    let candidate = assemble_candidate(task, proposal)?;
    let (stripped, sites) = candidate.strip_sorries();
    let scratch = scratch_name(&task.id);
    let report = lean.build(&BuildJob {
        scratch: &scratch,
        relative_path: CANDIDATE_FILE,
        source: &stripped,
        timeout: Duration::from_secs_f64(config.build_timeout_secs),
    })?;
    let done = |result, usage| ReviewOutcome {
        result,
        source: candidate.source.clone(),
        usage,
        queue_wait: report.queue_wait,
    };

    if !sites.is_empty() || !report.success {
        let goal_states = if sites.is_empty() {
            Vec::new()
        } else {
            extract_goal_states(&report.diagnostics, &sites, CANDIDATE_FILE)
        };
        // Compiled apart from the holes left by stripping.
        let compiled = !report.timed_out
            && report
                .diagnostics
                .iter()
                .filter(|d| d.is_error())
                .all(|d| !sites.is_empty() && d.is_unsolved_goals());
        return Ok(done(
            ReviewResult::Build(BuildFeedback {
                compiled,
                diagnostics: report.diagnostics.clone(),
                goal_states,
                raw_output: report.raw_output.clone(),
            }),
            None,
        ));
    }

    let det = DeterministicChecks::run(task, proposal, &config.denylist)?;
    if !det.passed() {
        return Ok(done(ReviewResult::Verdict(det.verdict()), None));
    }
    let (verdict, usage) = llm_review(task, proposal, &det, llm, config)?;
    Ok(done(ReviewResult::Verdict(verdict), Some(usage)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leanenv::{BuildReport, MockLean, MockScript};
    use crate::llm::{EchoLlm, ScriptedLlm};
    use crate::types::{Diagnostic, Severity};

    const TARGET: &str = "theorem foo (n : Nat) : n + 0 = n := sorry";

    fn task() -> TheoremTask {
        TheoremTask::new("foo", TARGET, format!("import Mathlib\n\n{TARGET}\n")).unwrap()
    }

    fn prop(thm: &str) -> ProofProposal {
        ProofProposal {
            reasoning: "r".into(),
            imports: vec![],
            opens: vec![],
            updated_theorem: thm.into(),
        }
    }

    fn diag(line: usize, col: usize, msg: &str) -> Diagnostic {
        Diagnostic {
            file: String::new(),
            line,
            column: col,
            severity: Severity::Error,
            message: msg.into(),
        }
    }

    #[test]
    fn parse_prompt_example_format() {
        let a = parse_reviewer_output(
            "check1: True, check2: True, check3: False, approved: False\nreasoning: \"Statement preserved, no sorry, but references undefined \nfoo_h1\"",
        )
        .unwrap();
        assert_eq!((a.check1, a.check2, a.check3, a.approved), (true, true, false, false));
        assert_eq!(a.reasoning, "Statement preserved, no sorry, but references undefined \nfoo_h1");
    }

    #[test]
    fn parse_json_and_markdown() {
        let a = parse_reviewer_output("```json\n{\"check1\": true, \"check2\": \"True\", \"check3\": true, \"approved\": true, \"reasoning\": \"ok\"}\n```").unwrap();
        assert!(a.approved && a.check2);
        let a = parse_reviewer_output("**check1**: True\n**check2**: False\n**check3**: True").unwrap();
        assert!(!a.check2 && !a.approved);
        assert!(parse_reviewer_output("looks good to me").is_err());
    }

    #[test]
    fn failing_build_lists_errors() {
        let lean = MockLean::new(MockScript::default().rule(
            &["bogus"],
            BuildReport::failed(vec![diag(3, 40, "unknown identifier 'bogus'")]),
        ));
        let out = review_proposal(&task(), &prop("theorem foo (n : Nat) : n + 0 = n := bogus"), &lean, &EchoLlm, &ProverConfig::default()).unwrap();
        assert_eq!(out.result.status(), AttemptStatus::BuildFailed);
        assert_eq!(out.result.render(), "Build failed with 1 error(s):\nline 3: unknown identifier 'bogus'");
        assert!(out.usage.is_none());
    }

    #[test]
    fn stripped_sorry_reports_goal() {
        let lean = MockLean::new(MockScript::default().rule(
            &["induction"],
            BuildReport::failed(vec![diag(5, 12, "unsolved goals\ncase zero\n⊢ 0 + 0 = 0")]),
        ));
        let thm = "theorem foo (n : Nat) : n + 0 = n := by\n  induction n with\n  | zero => sorry\n  | succ n ih => simp";
        let out = review_proposal(&task(), &prop(thm), &lean, &EchoLlm, &ProverConfig::default()).unwrap();
        assert_eq!(out.result.status(), AttemptStatus::Incomplete);
        let text = out.result.render();
        assert_eq!(text.matches("sorry #").count(), 1);
        assert!(text.contains("sorry #1 at line 5, column 12:\nunsolved goals\ncase zero\n⊢ 0 + 0 = 0"), "{text}");
        assert!(!text.contains("Build failed"));
    }

    #[test]
    fn approved_through_scripted_reviewer() {
        let llm = ScriptedLlm::fifo(["check1: True, check2: True, check3: True, approved: True\nreasoning: fine"]);
        let out = review_proposal(&task(), &prop("theorem foo (n : Nat) : n + 0 = n := by omega"), &MockLean::default(), &llm, &ProverConfig::default()).unwrap();
        let ReviewResult::Verdict(v) = &out.result else { panic!() };
        assert!(v.approved && v.statement_preserved && v.no_sorry && v.no_other_issues);
        assert_eq!(out.usage.unwrap().role, CallRole::Reviewer);
        assert_eq!(llm.calls()[0].messages[1].content, prompts::reviewer_user(TARGET, "theorem foo (n : Nat) : n + 0 = n := by omega"));
    }

    #[test]
    fn reviewer_check3_false_maps_through() {
        let llm = ScriptedLlm::fifo(["check1: True, check2: True, check3: False, approved: False\nreasoning: undefined foo_h1"]);
        let out = review_proposal(&task(), &prop("theorem foo (n : Nat) : n + 0 = n := by\n  exact foo_h1"), &MockLean::default(), &llm, &ProverConfig::default()).unwrap();
        let ReviewResult::Verdict(v) = out.result else { panic!() };
        assert_eq!((v.statement_preserved, v.no_sorry, v.no_other_issues, v.approved), (true, true, false, false));
    }

    #[test]
    fn loophole_short_circuits_llm() {
        let llm = ScriptedLlm::fifo(Vec::<String>::new());
        let out = review_proposal(&task(), &prop("theorem foo (n : Nat) : n + 0 = n := by apply?"), &MockLean::default(), &llm, &ProverConfig::default()).unwrap();
        assert!(llm.calls().is_empty());
        let text = out.result.render();
        assert!(text.contains("banned tactic `apply?`"), "{text}");
        assert!(!out.result.is_approved());
    }

    #[test]
    fn changed_statement_short_circuits_llm() {
        let llm = ScriptedLlm::fifo(Vec::<String>::new());
        let out = review_proposal(&task(), &prop("theorem foo (n m : Nat) : n + m = n := by simp"), &MockLean::default(), &llm, &ProverConfig::default()).unwrap();
        let ReviewResult::Verdict(v) = out.result else { panic!() };
        assert_eq!((v.statement_preserved, v.no_sorry, v.no_other_issues), (false, true, true));
    }

    #[test]
    fn lean_errors_propagate() {
        let mut t = task();
        t.file_content = "unrelated".into();
        assert!(matches!(
            review_proposal(&t, &prop("x"), &MockLean::default(), &EchoLlm, &ProverConfig::default()),
            Err(ReviewError::TargetNotFound)
        ));
    }

    #[test]
    fn scratch_names_are_unique_and_safe() {
        let a = scratch_name("putnam/1962 a1");
        let b = scratch_name("putnam/1962 a1");
        assert_ne!(a, b);
        assert!(a.starts_with("putnam_1962_a1_"));
    }
}
