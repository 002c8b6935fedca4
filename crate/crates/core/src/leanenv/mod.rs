//! Lean workspaces and builds.
//!
//! [`LeanBackend`] is the seam: [`LakeBackend`] runs the real toolchain in a
//! subprocess, [`MockLean`] answers from a script so the rest of the crate can
//! be tested without Lean installed. Both sit behind a [`BuildPool`] that caps
//! how many builds run at once.

mod catalog;
mod diagnostics;
mod lake;
mod mock;
mod pool;

use std::path::{Component, Path};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::types::Diagnostic;

pub use catalog::{
    toolchain_available, verify_catalog, FixtureCatalog, FixtureCategory, FixtureCheck, FixtureEntry,
    FixtureExpectation,
};
pub use diagnostics::{extract_goal_states, format_diagnostics, parse_diagnostics, NO_GOAL};
pub use lake::{LakeBackend, Workspace};
pub use mock::{MockLean, MockRule, MockScript};
pub use pool::BuildPool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub success: bool,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    /// Seconds spent building.
    #[serde(default)]
    pub duration: f64,
    #[serde(default)]
    pub timed_out: bool,
    #[serde(default)]
    pub raw_output: String,
    /// Seconds spent waiting for a pool slot; not part of `duration`.
    #[serde(default, skip_serializing)]
    pub queue_wait: f64,
}

impl BuildReport {
    pub fn ok() -> Self {
        BuildReport {
            success: true,
            diagnostics: Vec::new(),
            duration: 0.0,
            timed_out: false,
            raw_output: String::new(),
            queue_wait: 0.0,
        }
    }

    pub fn failed(diagnostics: Vec<Diagnostic>) -> Self {
        BuildReport {
            success: false,
            raw_output: format_diagnostics(&diagnostics),
            diagnostics,
            ..Self::ok()
        }
    }

    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LeanError {
    #[error("workspace error: {0}")]
    Workspace(String),
    #[error("scratch path `{0}` escapes the scratch directory")]
    PathEscape(String),
    #[error("empty source")]
    EmptySource,
    #[error("mock script: {0}")]
    Script(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One build request. `scratch` names the per-task subdirectory and
/// `relative_path` the file inside it.
#[derive(Debug, Clone, Copy)]
pub struct BuildJob<'a> {
    pub scratch: &'a str,
    pub relative_path: &'a str,
    pub source: &'a str,
    pub timeout: Duration,
}

pub trait LeanBackend: Send + Sync {
    fn build(&self, job: &BuildJob<'_>) -> Result<BuildReport, LeanError>;
}

/// Rejects absolute paths and any `..` component.
pub(crate) fn check_relative(path: &str) -> Result<(), LeanError> {
    let p = Path::new(path);
    let ok = !path.is_empty()
        && p.components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if ok {
        Ok(())
    } else {
        Err(LeanError::PathEscape(path.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_path_guard() {
        assert!(check_relative("Foo.lean").is_ok());
        assert!(check_relative("task_1/Foo.lean").is_ok());
        assert!(check_relative("../Foo.lean").is_err());
        assert!(check_relative("a/../../b.lean").is_err());
        assert!(check_relative("/etc/passwd").is_err());
        assert!(check_relative("").is_err());
    }

    #[test]
    fn failed_report_keeps_raw_text() {
        let d = parse_diagnostics("A.lean:1:0: error: boom");
        let r = BuildReport::failed(d);
        assert!(!r.success && r.has_errors());
        assert_eq!(r.raw_output, "A.lean:1:0: error: boom\n");
    }
}
