//! Fixture catalog: a manifest of small Lean files with known build outcomes,
//! used to check a real toolchain end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BuildJob, LeanBackend, LeanError};
use crate::review;
use crate::types::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureCategory {
    TrivialProof,
    CompileError,
    SorryGoals,
    LoopholePositive,
    LoopholeNegative,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureExpectation {
    pub success: bool,
    /// Lines that must carry an error diagnostic.
    pub error_lines: Vec<usize>,
    /// `[line, column]` of each expected "unsolved goals" diagnostic after
    /// sorry stripping.
    pub unsolved_goals: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub id: String,
    pub file: String,
    pub category: FixtureCategory,
    #[serde(default)]
    pub expect: FixtureExpectation,
}

/// `catalog.toml` at the root of the fixture package.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureCatalog {
    pub toolchain: String,
    #[serde(default)]
    pub mathlib_commit: String,
    pub fixtures: Vec<FixtureEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl FixtureCatalog {
    pub fn load(path: &Path) -> Result<Self, LeanError> {
        let text = fs::read_to_string(path)?;
        let mut cat: FixtureCatalog =
            toml::from_str(&text).map_err(|e| LeanError::Script(format!("{}: {e}", path.display())))?;
        cat.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cat)
    }

    pub fn by_category(&self, c: FixtureCategory) -> impl Iterator<Item = &FixtureEntry> {
        self.fixtures.iter().filter(move |f| f.category == c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureCheck {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

/// Builds every fixture and compares the outcome with its expectation.
/// Sorry-goal fixtures are stripped before the build, as the review path does.
pub fn verify_catalog(
    catalog: &FixtureCatalog,
    backend: &dyn LeanBackend,
    timeout: Duration,
) -> Result<Vec<FixtureCheck>, LeanError> {
    let mut out = Vec::new();
    for f in &catalog.fixtures {
        let source = fs::read_to_string(catalog.root.join(&f.file))?;
        let (source, _) = if f.category == FixtureCategory::SorryGoals {
            review::strip_sorries(&source)
        } else {
            (source, Vec::new())
        };
        let file_name = Path::new(&f.file)
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "Fixture.lean".into());
        let report = backend.build(&BuildJob {
            scratch: &format!("fixture_{}", f.id),
            relative_path: &file_name,
            source: &source,
            timeout,
        })?;
        let mut problems = Vec::new();
        if report.success != f.expect.success {
            problems.push(format!("success = {}, expected {}", report.success, f.expect.success));
        }
        for line in &f.expect.error_lines {
            if !report.diagnostics.iter().any(|d| d.is_error() && d.line == *line) {
                problems.push(format!("no error at line {line}"));
            }
        }
        let goals: Vec<[usize; 2]> = report
            .diagnostics
            .iter()
            .filter(|d| Diagnostic::is_unsolved_goals(d))
            .map(|d| [d.line, d.column])
            .collect();
        if f.category == FixtureCategory::SorryGoals && goals != f.expect.unsolved_goals {
            problems.push(format!("unsolved goals at {goals:?}, expected {:?}", f.expect.unsolved_goals));
        }
        let flagged = !review::detect_loopholes(&source, &review::default_denylist()).is_clean();
        match f.category {
            FixtureCategory::LoopholePositive if !flagged => problems.push("loophole not flagged".into()),
            FixtureCategory::LoopholeNegative if flagged => problems.push("clean fixture flagged".into()),
            _ => {}
        }
        out.push(FixtureCheck {
            id: f.id.clone(),
            passed: problems.is_empty(),
            detail: problems.join("; "),
        });
    }
    Ok(out)
}

/// True when `lake --version` runs.
pub fn toolchain_available() -> bool {
    std::process::Command::new("lake")
        .arg("--version")
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .is_ok_and(|s| s.success())
}
