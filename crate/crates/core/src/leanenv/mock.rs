use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BuildJob, BuildReport, LeanBackend, LeanError};

/// Matches when the source contains every needle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    pub contains: Vec<String>,
    pub report: BuildReport,
}

/// Script for [`MockLean`] (JSON).
///
/// ```json
/// {
///   "builds": { "<sha256 hex of source>": { "success": true } },
///   "rules": [ { "contains": ["Nat.add_succ"],
///                "report": { "success": false, "diagnostics": [
///                   { "file": "Main.lean", "line": 4, "column": 2,
///                     "severity": "error", "message": "unknown identifier Nat.add_succ" } ] } } ],
///   "default": { "success": true }
/// }
/// ```
///
/// Lookup: exact hash, then first matching rule, then `default`, then a clean
/// successful build. An empty `file` in a scripted diagnostic is filled with
/// the job's relative path.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub builds: BTreeMap<String, BuildReport>,
    pub rules: Vec<MockRule>,
    pub default: Option<BuildReport>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, LeanError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LeanError::Script(format!("{}: {e}", path.display())))
    }

    pub fn rule(mut self, contains: &[&str], report: BuildReport) -> Self {
        self.rules.push(MockRule {
            contains: contains.iter().map(|s| s.to_string()).collect(),
            report,
        });
        self
    }
}

pub fn source_hash(source: &str) -> String {
    hex::encode(Sha256::digest(source.as_bytes()))
}

/// Deterministic, lock-free build backend driven by a [`MockScript`].
#[derive(Debug, Clone, Default)]
pub struct MockLean {
    script: MockScript,
}

impl MockLean {
    pub fn new(script: MockScript) -> Self {
        MockLean { script }
    }

    pub fn from_file(path: &Path) -> Result<Self, LeanError> {
        Ok(Self::new(MockScript::load(path)?))
    }
}

impl LeanBackend for MockLean {
    fn build(&self, job: &BuildJob<'_>) -> Result<BuildReport, LeanError> {
        super::check_relative(job.scratch)?;
        super::check_relative(job.relative_path)?;
        if job.source.trim().is_empty() {
            return Err(LeanError::EmptySource);
        }
        let s = &self.script;
        let mut report = s
            .builds
            .get(&source_hash(job.source))
            .or_else(|| {
                s.rules
                    .iter()
                    .find(|r| r.contains.iter().all(|n| job.source.contains(n.as_str())))
                    .map(|r| &r.report)
            })
            .or(s.default.as_ref())
            .cloned()
            .unwrap_or_else(BuildReport::ok);
        for d in &mut report.diagnostics {
            if d.file.is_empty() {
                d.file = job.relative_path.to_string();
            }
        }
        if report.raw_output.is_empty() {
            report.raw_output = super::format_diagnostics(&report.diagnostics);
        }
        report.success = report.success && !report.has_errors() && !report.timed_out;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Diagnostic, Severity};
    use std::time::Duration;

    fn job(source: &str) -> BuildJob<'_> {
        BuildJob {
            scratch: "t",
            relative_path: "Main.lean",
            source,
            timeout: Duration::from_secs(1),
        }
    }

    #[test]
    fn scripted_failure_passes_through() {
        let e = Diagnostic {
            file: String::new(),
            line: 3,
            column: 10,
            severity: Severity::Error,
            message: "E".into(),
        };
        let mock = MockLean::new(MockScript::default().rule(&["bad"], BuildReport::failed(vec![e])));
        let r = mock.build(&job("bad proof")).unwrap();
        assert!(!r.success);
        assert_eq!((r.diagnostics[0].line, r.diagnostics[0].column), (3, 10));
        assert_eq!(r.diagnostics[0].file, "Main.lean");
        assert!(mock.build(&job("good proof")).unwrap().success);
    }

    #[test]
    fn hash_lookup_wins_over_rules() {
        let mut script = MockScript::default().rule(&["x"], BuildReport::failed(vec![]));
        script.builds.insert(source_hash("x"), BuildReport::ok());
        let mock = MockLean::new(script);
        assert!(mock.build(&job("x")).unwrap().success);
        assert!(!mock.build(&job("xx")).unwrap().success);
    }

    #[test]
    fn script_json_schema() {
        let json = r#"{"rules":[{"contains":["sorry"],"report":{"success":true,"diagnostics":[
            {"file":"","line":3,"column":13,"severity":"error","message":"unsolved goals\n⊢ 0 + 0 = 0"}]}}]}"#;
        let script: MockScript = serde_json::from_str(json).unwrap();
        let r = MockLean::new(script).build(&job("sorry")).unwrap();
        // Error diagnostics force success = false.
        assert!(!r.success);
        assert!(r.raw_output.starts_with("Main.lean:3:13: error: unsolved goals"));
    }

    #[test]
    fn rejects_escaping_paths_and_empty_source() {
        let mock = MockLean::default();
        let mut j = job("x");
        j.scratch = "../up";
        assert!(matches!(mock.build(&j), Err(LeanError::PathEscape(_))));
        assert!(matches!(mock.build(&job("  ")), Err(LeanError::EmptySource)));
    }
}
