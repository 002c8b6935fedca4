//! The proposer's two tools: Mathlib library search and web search.
//!
//! Each tool is a trait with an HTTP client and a deterministic mock.
//! [`Toolbox`] owns whichever backends are configured and turns a tool call
//! into result text; a failing tool yields error text, never an `Err`.

mod library;
mod web;

use std::collections::BTreeSet;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::llm::ToolCallRequest;
use crate::types::ToolKind;

pub use library::{HttpLibrarySearch, LibrarySearch, MockLibrarySearch, PremiseEntry};
pub use web::{MockWebSearch, TavilySearch, WebScript, WebSearch};

pub const DEFAULT_LIMIT: usize = 10;
pub const SNIPPET_CHARS: usize = 500;
pub const TOOL_DISABLED: &str = "tool disabled";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseHit {
    pub name: String,
    pub statement: String,
    pub score: f64,
    #[serde(default)]
    pub module: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebHit {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolError {
    #[error("tool unavailable: {0}")]
    Unavailable(String),
    #[error("invalid request: {0}")]
    Invalid(String),
}

/// Cuts `s` to at most `max` chars, marking the cut.
pub fn truncate_chars(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

/// One `name : statement` line per hit.
pub fn render_premises(hits: &[PremiseHit]) -> String {
    if hits.is_empty() {
        return "no results".to_string();
    }
    hits.iter()
        .map(|h| format!("{} : {}", h.name, truncate_chars(h.statement.trim(), SNIPPET_CHARS)))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_web(hits: &[WebHit]) -> String {
    if hits.is_empty() {
        return "no results".to_string();
    }
    hits.iter()
        .map(|h| format!("{} ({})\n{}", h.title, h.url, truncate_chars(h.snippet.trim(), SNIPPET_CHARS)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Counting semaphore bounding in-flight requests per toolbox.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}

pub struct Toolbox {
    library: Option<Arc<dyn LibrarySearch>>,
    web: Option<Arc<dyn WebSearch>>,
    enabled: BTreeSet<ToolKind>,
    limit: usize,
    gate: Gate,
}

impl std::fmt::Debug for Toolbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Toolbox")
            .field("library", &self.library.is_some())
            .field("web", &self.web.is_some())
            .field("enabled", &self.enabled)
            .field("limit", &self.limit)
            .finish()
    }
}

impl Default for Toolbox {
    fn default() -> Self {
        Self::disabled()
    }
}

impl Toolbox {
    /// A toolbox that answers every call with "tool disabled".
    pub fn disabled() -> Self {
        Toolbox {
            library: None,
            web: None,
            enabled: BTreeSet::new(),
            limit: DEFAULT_LIMIT,
            gate: Gate::new(8),
        }
    }

    pub fn with_library(mut self, lib: Arc<dyn LibrarySearch>) -> Self {
        self.library = Some(lib);
        self.enabled.insert(ToolKind::LibrarySearch);
        self
    }

    pub fn with_web(mut self, web: Arc<dyn WebSearch>) -> Self {
        self.web = Some(web);
        self.enabled.insert(ToolKind::WebSearch);
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit.max(1);
        self
    }

    /// Caps concurrent requests across every loop sharing this toolbox.
    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.gate = Gate::new(n);
        self
    }

    /// Tools that both have a backend and are in `allowed`.
    pub fn available(&self, allowed: &BTreeSet<ToolKind>) -> Vec<ToolKind> {
        self.enabled.intersection(allowed).copied().collect()
    }

    /// Runs one call and renders its result. Disabled, unknown and failing
    /// tools come back as text.
    pub fn call(&self, req: &ToolCallRequest, allowed: &BTreeSet<ToolKind>) -> String {
        let Some(kind) = req.kind() else {
            return format!("error: unknown tool `{}`", req.name);
        };
        if !allowed.contains(&kind) {
            return TOOL_DISABLED.to_string();
        }
        let query = req.arguments.get("query").map(|q| q.trim()).unwrap_or("");
        if query.is_empty() {
            return "error: empty query".to_string();
        }
        let result = match kind {
            ToolKind::LibrarySearch => match &self.library {
                Some(lib) => self.gate.run(|| lib.search(query, self.limit)).map(|h| render_premises(&h)),
                None => return TOOL_DISABLED.to_string(),
            },
            ToolKind::WebSearch => match &self.web {
                Some(web) => self.gate.run(|| web.search(query, self.limit)).map(|h| render_web(&h)),
                None => return TOOL_DISABLED.to_string(),
            },
        };
        result.unwrap_or_else(|e| format!("error: {e}"))
    }

    /// Dispatches every request concurrently and returns the results in
    /// request order.
    pub fn run_round(&self, requests: &[ToolCallRequest], allowed: &BTreeSet<ToolKind>) -> Vec<String> {
        thread::scope(|s| {
            let handles: Vec<_> = requests
                .iter()
                .map(|r| s.spawn(move || self.call(r, allowed)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| "error: tool panicked".to_string()))
                .collect()
        })
    }
}
