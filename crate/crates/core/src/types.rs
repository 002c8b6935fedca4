//! Domain types shared by the proposer, review, memory and harness modules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lexer;

/// A theorem to prove, together with the file it lives in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremTask {
    pub id: String,
    /// Source text of the theorem, usually with a `sorry` body.
    pub target_theorem: String,
    /// Full Lean source file containing `target_theorem` exactly once.
    pub file_content: String,
    #[serde(default)]
    pub dataset: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("target theorem occurs {0} times in the file (expected exactly once)")]
    TargetOccurrences(usize),
    #[error("target theorem has no `theorem`/`lemma` header with a name")]
    NoHeader,
    #[error("no declaration named `{0}` in the file")]
    TheoremNotFound(String),
}

impl TheoremTask {
    pub fn new(
        id: impl Into<String>,
        target_theorem: impl Into<String>,
        file_content: impl Into<String>,
    ) -> Result<Self, TaskError> {
        let task = TheoremTask {
            id: id.into(),
            target_theorem: target_theorem.into(),
            file_content: file_content.into(),
            dataset: String::new(),
            metadata: BTreeMap::new(),
        };
        task.validate()?;
        Ok(task)
    }

    /// Builds a task by locating the declaration `name` inside `file_content`.
    ///
    /// The declaration runs from its header keyword (including any attributes or
    /// modifiers on the same line) to the next top-level command or end of file.
    pub fn from_file(
        id: impl Into<String>,
        file_content: impl Into<String>,
        name: &str,
    ) -> Result<Self, TaskError> {
        let file_content = file_content.into();
        let span = lexer::find_declaration(&file_content, name)
            .ok_or_else(|| TaskError::TheoremNotFound(name.to_string()))?;
        let target = file_content[span].to_string();
        Self::new(id, target, file_content)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let n = self.file_content.matches(&self.target_theorem).count();
        if n != 1 || self.target_theorem.is_empty() {
            return Err(TaskError::TargetOccurrences(n));
        }
        if lexer::theorem_name(&self.target_theorem).is_none() {
            return Err(TaskError::NoHeader);
        }
        Ok(())
    }

    /// Name declared by the target theorem.
    pub fn theorem_name(&self) -> Option<String> {
        lexer::theorem_name(&self.target_theorem)
    }
}

/// The proposer's structured output.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProofProposal {
    pub reasoning: String,
    pub imports: Vec<String>,
    pub opens: Vec<String>,
    pub updated_theorem: String,
}

impl ProofProposal {
    /// Trims entries, strips `import `/`open ` prefixes and quotes, and drops
    /// empties and duplicates while keeping first-seen order.
    pub fn normalize(&mut self) {
        self.imports = normalize_names(&self.imports, "import");
        self.opens = normalize_names(&self.opens, "open");
    }
}

fn normalize_names(items: &[String], keyword: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for item in items {
        let mut s = item.trim();
        if let Some(rest) = s.strip_prefix(keyword) {
            if rest.starts_with(char::is_whitespace) {
                s = rest.trim();
            }
        }
        let s = s.trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
        for part in s.split_whitespace() {
            if seen.insert(part.to_string()) {
                out.push(part.to_string());
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl Severity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "error" => Some(Severity::Error),
            "warning" => Some(Severity::Warning),
            "info" | "information" => Some(Severity::Info),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One compiler message. `line` is 1-based and `column` 0-based, as Lean prints them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn is_unsolved_goals(&self) -> bool {
        self.message.trim_start().starts_with("unsolved goals")
    }
}

/// Position of a `sorry`/`admit` token: 1-based line, 0-based column in chars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourcePos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalState {
    pub site: SourcePos,
    pub goal: String,
}

/// Result of compiling a candidate, as fed back to the proposer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildFeedback {
    pub compiled: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub goal_states: Vec<GoalState>,
    pub raw_output: String,
}

impl BuildFeedback {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    /// Text handed to the proposer and to memory.
    pub fn render(&self) -> String {
        let mut out = String::new();
        // Unsolved-goal errors at sorry sites are reported with the goal states below.
        let errors: Vec<&Diagnostic> = self
            .errors()
            .filter(|d| self.goal_states.is_empty() || !d.is_unsolved_goals())
            .collect();
        if !errors.is_empty() {
            out.push_str(&format!("Build failed with {} error(s):\n", errors.len()));
            for d in &errors {
                out.push_str(&format!("line {}: {}\n", d.line, d.message.trim_end()));
            }
        } else if self.compiled && self.goal_states.is_empty() {
            out.push_str("Build succeeded.\n");
        }
        if !self.goal_states.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!(
                "{} sorry placeholder(s) were removed before the build. Goals at those locations:\n",
                self.goal_states.len()
            ));
            for (i, g) in self.goal_states.iter().enumerate() {
                out.push_str(&format!(
                    "sorry #{} at line {}, column {}:\n{}\n",
                    i + 1,
                    g.site.line,
                    g.site.column,
                    g.goal.trim_end()
                ));
            }
        }
        out.trim_end().to_string()
    }
}

/// The reviewer's three checks and the overall decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub statement_preserved: bool,
    pub no_sorry: bool,
    pub no_other_issues: bool,
    pub approved: bool,
    pub reasoning: String,
}

impl ReviewVerdict {
    /// Builds a verdict; `approved` is forced false unless every check holds.
    pub fn new(
        statement_preserved: bool,
        no_sorry: bool,
        no_other_issues: bool,
        approved: bool,
        reasoning: impl Into<String>,
    ) -> Self {
        ReviewVerdict {
            statement_preserved,
            no_sorry,
            no_other_issues,
            approved: approved && statement_preserved && no_sorry && no_other_issues,
            reasoning: reasoning.into(),
        }
    }

    pub fn render(&self) -> String {
        let head = if self.approved {
            "Review approved the proof."
        } else {
            "Review rejected the proof."
        };
        format!(
            "{head}\ncheck1 (statement preserved): {}\ncheck2 (no sorry): {}\ncheck3 (no other issues): {}\nreasoning: {}",
            py_bool(self.statement_preserved),
            py_bool(self.no_sorry),
            py_bool(self.no_other_issues),
            self.reasoning.trim()
        )
    }
}

fn py_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
    pub thinking: u64,
}

impl TokenUsage {
    pub fn new(input: u64, output: u64, thinking: u64) -> Self {
        TokenUsage {
            input,
            output,
            thinking,
        }
    }

    pub fn total(&self) -> u64 {
        self.input + self.output + self.thinking
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.input += rhs.input;
        self.output += rhs.output;
        self.thinking += rhs.thinking;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallRole {
    Proposer,
    Reviewer,
    Reflector,
}

/// Tokens spent by one LLM call, tagged with the model that was billed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelUsage {
    pub model: String,
    pub role: CallRole,
    pub tokens: TokenUsage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStatus {
    Approved,
    Rejected,
    BuildFailed,
    Incomplete,
    Malformed,
    /// A service failed mid-attempt; the loop stops after recording it.
    Error,
}

/// One propose/check cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub iteration: usize,
    pub proposal: ProofProposal,
    pub feedback: String,
    pub status: AttemptStatus,
    pub usage: Vec<ModelUsage>,
    /// Seconds, including tool calls and excluding build queue wait.
    pub wall_time: f64,
}

impl AttemptRecord {
    pub fn tokens(&self) -> TokenUsage {
        let mut t = TokenUsage::default();
        for u in &self.usage {
            t += u.tokens;
        }
        t
    }

    pub fn tokens_in(&self) -> u64 {
        self.tokens().input
    }

    pub fn tokens_out(&self) -> u64 {
        self.tokens().output
    }

    pub fn tokens_thinking(&self) -> u64 {
        self.tokens().thinking
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryStrategy {
    None,
    HistoryN(usize),
    SelfManaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    LibrarySearch,
    WebSearch,
}

impl ToolKind {
    pub fn name(self) -> &'static str {
        match self {
            ToolKind::LibrarySearch => "library_search",
            ToolKind::WebSearch => "web_search",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "library_search" => Some(ToolKind::LibrarySearch),
            "web_search" => Some(ToolKind::WebSearch),
            _ => None,
        }
    }
}

/// Provider thinking control: a token budget or a named level ("low", "high", ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThinkingBudget {
    Tokens(u32),
    Level(String),
}

impl Default for ThinkingBudget {
    fn default() -> Self {
        ThinkingBudget::Tokens(10_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Iterative,
    SingleShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProverConfig {
    pub max_iterations: usize,
    pub mode: PromptMode,
    pub memory: MemoryStrategy,
    pub tools_enabled: BTreeSet<ToolKind>,
    pub thinking_budget: ThinkingBudget,
    pub model: String,
    /// Defaults to `model`.
    pub reviewer_model: Option<String>,
    /// Defaults to `model`.
    pub reflection_model: Option<String>,
    pub build_timeout_secs: f64,
    pub max_tool_calls: usize,
    pub lean_version: String,
    pub notes_cap: usize,
    pub render_budget: usize,
    pub denylist: Vec<String>,
    /// Per-sample seed forwarded to LLM requests; not part of the run fingerprint.
    #[serde(skip)]
    pub sampling_seed: Option<u64>,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            max_iterations: 20,
            mode: PromptMode::Iterative,
            memory: MemoryStrategy::SelfManaged,
            tools_enabled: BTreeSet::new(),
            thinking_budget: ThinkingBudget::default(),
            model: "mock".to_string(),
            reviewer_model: None,
            reflection_model: None,
            build_timeout_secs: 300.0,
            max_tool_calls: 4,
            lean_version: "4.24".to_string(),
            notes_cap: 4_000,
            render_budget: 60_000,
            denylist: crate::review::default_denylist(),
            sampling_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
    #[error("history memory needs n >= 1")]
    ZeroHistory,
    #[error("build_timeout must be positive")]
    NonPositiveTimeout,
    #[error("single-shot mode requires memory = none and max_iterations = 1")]
    SingleShotShape,
}

impl ProverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_iterations == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        if self.memory == MemoryStrategy::HistoryN(0) {
            return Err(ConfigError::ZeroHistory);
        }
        if !(self.build_timeout_secs > 0.0) {
            return Err(ConfigError::NonPositiveTimeout);
        }
        if self.mode == PromptMode::SingleShot
            && (self.memory != MemoryStrategy::None || self.max_iterations != 1)
        {
            return Err(ConfigError::SingleShotShape);
        }
        Ok(())
    }

    pub fn single_shot() -> Self {
        ProverConfig {
            max_iterations: 1,
            mode: PromptMode::SingleShot,
            memory: MemoryStrategy::None,
            ..Default::default()
        }
    }

    pub fn reviewer_model(&self) -> &str {
        self.reviewer_model.as_deref().unwrap_or(&self.model)
    }

    pub fn reflection_model(&self) -> &str {
        self.reflection_model.as_deref().unwrap_or(&self.model)
    }

    /// Stable hash of every setting that affects results.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Outcome {
    Proved {
        iteration: usize,
        final_source: String,
    },
    Exhausted,
    Error {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofResult {
    pub task_id: String,
    pub outcome: Outcome,
    pub transcript: Vec<AttemptRecord>,
    pub total_cost: f64,
}

impl ProofResult {
    pub fn solved_at(&self) -> Option<usize> {
        match self.outcome {
            Outcome::Proved { iteration, .. } => Some(iteration),
            _ => None,
        }
    }

    /// The approved proposal, when the outcome is `Proved`.
    pub fn final_proposal(&self) -> Option<&ProofProposal> {
        self.solved_at()
            .and_then(|_| self.transcript.last())
            .map(|a| &a.proposal)
    }
}
