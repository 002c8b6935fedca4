//! Run settings: built-in defaults, then a profile from the config file, then
//! command-line overrides.
//!
//! ```toml
//! profile = "default"          # used when --profile is not given
//!
//! [profiles.real]
//! llm = "anthropic"            # echo | coin | scripted | anthropic
//! model = "claude-opus-4-1"
//! lean = "lake"                # mock | lake
//! workspace = "/path/to/lean/project"
//! memory = "history-5"         # none | history-N | self-managed
//! tools = ["library_search", "web_search"]
//! library_search = "http"
//! library_endpoint = "http://localhost:8000/search"
//!
//! [profiles.real.prices.claude-opus-4-1]
//! input = 15.0
//! output = 75.0
//! ```
//!
//! Every key can also be given as `--set key=value`; values are parsed as TOML
//! and fall back to plain strings. Credentials are only read from the
//! environment variables named by `llm_key_env` and `web_key_env`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::agent::ServiceBundle;
use crate::harness::{ModelPrice, PriceTable};
use crate::leanenv::{BuildPool, LakeBackend, LeanBackend, MockLean, MockScript, Workspace};
use crate::llm::{AnthropicClient, CoinFlipLlm, EchoLlm, LlmClient, RetryPolicy, RetryingClient, ScriptedLlm};
use crate::toolbox::{HttpLibrarySearch, MockLibrarySearch, MockWebSearch, TavilySearch, Toolbox};
use crate::types::{MemoryStrategy, PromptMode, ProverConfig, ThinkingBudget, ToolKind};

pub const DEFAULT_PROFILE: &str = "default";
pub const DEFAULT_CONFIG_FILE: &str = "leanloop.toml";

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("bad override `{0}` (expected key=value)")]
    BadOverride(String),
    #[error("invalid memory strategy `{0}` (expected none, history-N or self-managed)")]
    Memory(String),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot start {what}: {message}")]
    Service { what: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmKind {
    #[default]
    Echo,
    Scripted,
    /// Seeded mock that proves each attempt with probability `coin_p`.
    Coin,
    Anthropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeanKind {
    #[default]
    Mock,
    Lake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibraryKind {
    None,
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WebKind {
    None,
    #[default]
    Mock,
    Tavily,
}

/// Everything a profile can set. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub model: String,
    pub reviewer_model: Option<String>,
    pub reflection_model: Option<String>,
    pub max_iterations: usize,
    pub mode: PromptMode,
    pub memory: String,
    pub tools: Vec<ToolKind>,
    pub thinking_budget: ThinkingBudget,
    /// Seconds.
    pub build_timeout: f64,
    pub max_tool_calls: usize,
    pub lean_version: String,
    pub notes_cap: usize,
    pub render_budget: usize,
    pub denylist: Option<Vec<String>>,

    pub llm: LlmKind,
    pub llm_script: Option<PathBuf>,
    pub llm_base_url: Option<String>,
    pub llm_key_env: String,
    pub llm_retries: u32,
    pub coin_p: f64,

    pub lean: LeanKind,
    pub lean_script: Option<PathBuf>,
    pub workspace: Option<PathBuf>,
    pub build_command: Option<Vec<String>>,
    /// Concurrent builds; defaults to half the cores.
    pub build_jobs: Option<usize>,

    pub library_search: LibraryKind,
    pub library_endpoint: Option<String>,
    pub library_index: Option<PathBuf>,
    pub web_search: WebKind,
    pub web_script: Option<PathBuf>,
    pub web_base_url: Option<String>,
    pub web_key_env: String,
    pub tool_limit: usize,
    /// Seconds per search request.
    pub tool_timeout: f64,

    pub jobs: usize,
    pub samples: usize,
    pub seed: u64,
    pub prices: PriceTable,
}

impl Default for Settings {
    fn default() -> Self {
        let p = ProverConfig::default();
        Settings {
            model: p.model,
            reviewer_model: None,
            reflection_model: None,
            max_iterations: p.max_iterations,
            mode: p.mode,
            memory: "self-managed".into(),
            tools: Vec::new(),
            thinking_budget: p.thinking_budget,
            build_timeout: p.build_timeout_secs,
            max_tool_calls: p.max_tool_calls,
            lean_version: p.lean_version,
            notes_cap: p.notes_cap,
            render_budget: p.render_budget,
            denylist: None,
            llm: LlmKind::Echo,
            llm_script: None,
            llm_base_url: None,
            llm_key_env: "ANTHROPIC_API_KEY".into(),
            llm_retries: 3,
            coin_p: 0.3,
            lean: LeanKind::Mock,
            lean_script: None,
            workspace: None,
            build_command: None,
            build_jobs: None,
            library_search: LibraryKind::Mock,
            library_endpoint: None,
            library_index: None,
            web_search: WebKind::Mock,
            web_script: None,
            web_base_url: None,
            web_key_env: "TAVILY_API_KEY".into(),
            tool_limit: crate::toolbox::DEFAULT_LIMIT,
            tool_timeout: 30.0,
            jobs: 1,
            samples: 1,
            seed: 0,
            prices: PriceTable::default(),
        }
    }
}

pub fn parse_memory(s: &str) -> Result<MemoryStrategy, SettingsError> {
    let norm = s.trim().to_ascii_lowercase().replace('_', "-");
    match norm.as_str() {
        "none" => Ok(MemoryStrategy::None),
        "self-managed" | "selfmanaged" => Ok(MemoryStrategy::SelfManaged),
        _ => norm
            .strip_prefix("history-")
            .or_else(|| norm.strip_prefix("history:"))
            .and_then(|n| n.parse().ok())
            .map(MemoryStrategy::HistoryN)
            .ok_or_else(|| SettingsError::Memory(s.to_string())),
    }
}

/// Splits `key=value`, parsing the value as TOML when possible.
pub fn parse_override(s: &str) -> Result<(String, toml::Value), SettingsError> {
    let (k, v) = s.split_once('=').ok_or_else(|| SettingsError::BadOverride(s.to_string()))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(SettingsError::BadOverride(s.to_string()));
    }
    let v = v.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), SettingsError> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| SettingsError::Invalid(format!("`{part}` in `{key}` is not a table")))?;
    }
    Ok(())
}

/// Where settings come from: an optional file, a profile in it, and
/// `key=value` overrides applied in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliConfig {
    pub config_file: Option<PathBuf>,
    pub profile: Option<String>,
    pub overrides: Vec<(String, toml::Value)>,
}

impl CliConfig {
    pub fn set(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.overrides.push((key.to_string(), value.into()));
        self
    }

    pub fn resolve(&self) -> Result<Settings, SettingsError> {
        let file = match &self.config_file {
            Some(p) => Some((p.clone(), true)),
            None => Some(PathBuf::from(DEFAULT_CONFIG_FILE)).filter(|p| p.is_file()).map(|p| (p, false)),
        };
        let doc: toml::Table = match &file {
            Some((p, _)) => {
                let text = fs::read_to_string(p).map_err(|source| SettingsError::Io { path: p.clone(), source })?;
                toml::from_str(&text).map_err(|e| SettingsError::Parse(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let profiles = doc.get("profiles").and_then(|v| v.as_table());
        let name = self
            .profile
            .clone()
            .or_else(|| doc.get("profile").and_then(|v| v.as_str()).map(str::to_string))
            .unwrap_or_else(|| DEFAULT_PROFILE.to_string());
        let mut table = match profiles.and_then(|p| p.get(&name)) {
            Some(toml::Value::Table(t)) => t.clone(),
            Some(_) => return Err(SettingsError::Parse(format!("profile `{name}` is not a table"))),
            None if name == DEFAULT_PROFILE => toml::Table::new(),
            None => return Err(SettingsError::UnknownProfile(name)),
        };
        for (k, v) in &self.overrides {
            set_path(&mut table, k, v.clone())?;
        }
        // Single-shot implies its own shape unless the user pinned it.
        if table.get("mode").and_then(|v| v.as_str()) == Some("single_shot") {
            table.entry("memory").or_insert_with(|| "none".into());
            table.entry("max_iterations").or_insert(toml::Value::Integer(1));
        }
        let mut s: Settings = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| SettingsError::Parse(format!("profile `{name}`: {}", e.message())))?;
        s.prices.0.entry("mock".into()).or_insert(ModelPrice {
            input: 0.0,
            output: 0.0,
            thinking: None,
        });
        s.prover_config()?;
        Ok(s)
    }
}

impl Settings {
    pub fn prover_config(&self) -> Result<ProverConfig, SettingsError> {
        let c = ProverConfig {
            max_iterations: self.max_iterations,
            mode: self.mode,
            memory: parse_memory(&self.memory)?,
            tools_enabled: self.tools.iter().copied().collect::<BTreeSet<_>>(),
            thinking_budget: self.thinking_budget.clone(),
            model: self.model.clone(),
            reviewer_model: self.reviewer_model.clone(),
            reflection_model: self.reflection_model.clone(),
            build_timeout_secs: self.build_timeout,
            max_tool_calls: self.max_tool_calls,
            lean_version: self.lean_version.clone(),
            notes_cap: self.notes_cap,
            render_budget: self.render_budget,
            denylist: self.denylist.clone().unwrap_or_else(crate::review::default_denylist),
            sampling_seed: None,
        };
        c.validate().map_err(|e| SettingsError::Invalid(e.to_string()))?;
        Ok(c)
    }

    fn service_err(what: &'static str) -> impl Fn(String) -> SettingsError {
        move |message| SettingsError::Service { what, message }
    }

    pub fn llm_client(&self) -> Result<Arc<dyn LlmClient>, SettingsError> {
        let err = Self::service_err("llm");
        Ok(match self.llm {
            LlmKind::Echo => Arc::new(EchoLlm),
            LlmKind::Coin => Arc::new(CoinFlipLlm::new(self.coin_p)),
            LlmKind::Scripted => {
                let p = self
                    .llm_script
                    .as_ref()
                    .ok_or_else(|| err("llm = \"scripted\" needs llm_script".into()))?;
                Arc::new(ScriptedLlm::from_file(p).map_err(|e| err(e.to_string()))?)
            }
            LlmKind::Anthropic => {
                let c = AnthropicClient::from_env(&self.llm_key_env, self.llm_base_url.as_deref())
                    .map_err(|e| err(e.to_string()))?;
                Arc::new(RetryingClient::new(c, RetryPolicy { attempts: self.llm_retries.max(1), ..Default::default() }))
            }
        })
    }

    pub fn lean_backend(&self) -> Result<Arc<dyn LeanBackend>, SettingsError> {
        let err = Self::service_err("lean");
        let inner: Arc<dyn LeanBackend> = match self.lean {
            LeanKind::Mock => match &self.lean_script {
                Some(p) => Arc::new(MockLean::from_file(p).map_err(|e| err(e.to_string()))?),
                None => Arc::new(MockLean::new(MockScript::default())),
            },
            LeanKind::Lake => {
                let root = self
                    .workspace
                    .as_ref()
                    .ok_or_else(|| err("lean = \"lake\" needs workspace".into()))?;
                let ws = Workspace::open(root.clone(), self.build_command.clone()).map_err(|e| err(e.to_string()))?;
                Arc::new(LakeBackend::new(ws))
            }
        };
        let cap = self.build_jobs.unwrap_or_else(BuildPool::default_capacity);
        Ok(Arc::new(BuildPool::new(inner, cap)))
    }

    pub fn toolbox(&self) -> Result<Toolbox, SettingsError> {
        let err = Self::service_err("tools");
        let timeout = Duration::from_secs_f64(self.tool_timeout.max(0.001));
        let mut tb = Toolbox::disabled().with_limit(self.tool_limit);
        match self.library_search {
            LibraryKind::None => {}
            LibraryKind::Mock => {
                let lib = match &self.library_index {
                    Some(p) => MockLibrarySearch::load(p).map_err(|e| err(e.to_string()))?,
                    None => MockLibrarySearch::nat_sample(),
                };
                tb = tb.with_library(Arc::new(lib));
            }
            LibraryKind::Http => {
                let url = self
                    .library_endpoint
                    .as_ref()
                    .ok_or_else(|| err("library_search = \"http\" needs library_endpoint".into()))?;
                tb = tb.with_library(Arc::new(HttpLibrarySearch::new(url.clone(), timeout).map_err(|e| err(e.to_string()))?));
            }
        }
        match self.web_search {
            WebKind::None => {}
            WebKind::Mock => {
                let web = match &self.web_script {
                    Some(p) => MockWebSearch::load(p).map_err(|e| err(e.to_string()))?,
                    None => MockWebSearch::new(Default::default()),
                };
                tb = tb.with_web(Arc::new(web));
            }
            WebKind::Tavily => {
                // A missing key disables the tool rather than failing the run.
                if let Ok(web) = TavilySearch::from_env(&self.web_key_env, self.web_base_url.as_deref(), timeout) {
                    tb = tb.with_web(Arc::new(web));
                }
            }
        }
        Ok(tb)
    }

    pub fn services(&self) -> Result<ServiceBundle, SettingsError> {
        Ok(ServiceBundle::new(self.llm_client()?, self.lean_backend()?)
            .with_toolbox(self.toolbox()?)
            .with_prices(self.prices.clone()))
    }
}

/// Reads a profile without touching the current directory's config file.
pub fn load(path: &Path, profile: Option<&str>) -> Result<Settings, SettingsError> {
    CliConfig {
        config_file: Some(path.to_path_buf()),
        profile: profile.map(str::to_string),
        overrides: Vec::new(),
    }
    .resolve()
}
