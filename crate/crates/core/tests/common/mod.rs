#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use leanloop::agent::ServiceBundle;
use leanloop::leanenv::{BuildReport, MockLean, MockScript};
use leanloop::llm::{CoinFlipLlm, ScriptFile, ScriptedLlm, ScriptedReply};
use leanloop::types::{Diagnostic, MemoryStrategy, ProverConfig, Severity, TheoremTask};

pub const TARGET: &str = "theorem add_zero (n : Nat) : n + 0 = n := sorry";

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn task() -> TheoremTask {
    TheoremTask::new("add_zero", TARGET, format!("import Mathlib\n\n{TARGET}\n")).unwrap()
}

pub fn answer(body: &str) -> ScriptedReply {
    ScriptedReply::text(format!(
        "reasoning: try\nimports: []\nopens: []\nupdated_theorem:\n```lean\ntheorem add_zero (n : Nat) : n + 0 = n := by\n  {body}\n```"
    ))
    .with_usage(100, 50, 10)
}

pub fn approve() -> ScriptedReply {
    ScriptedReply::text("check1: True, check2: True, check3: True, approved: True\nreasoning: ok")
}

pub fn reject(why: &str) -> ScriptedReply {
    ScriptedReply::text(format!(
        "check1: True, check2: True, check3: False, approved: False\nreasoning: {why}"
    ))
}

/// Builds succeed unless the source mentions `bogus`.
pub fn lean() -> Arc<MockLean> {
    Arc::new(MockLean::new(MockScript::default().rule(
        &["bogus"],
        BuildReport::failed(vec![Diagnostic {
            file: String::new(),
            line: 4,
            column: 2,
            severity: Severity::Error,
            message: "unknown identifier 'bogus'".into(),
        }]),
    )))
}

pub fn scripted(script: ScriptFile) -> (Arc<ScriptedLlm>, ServiceBundle) {
    let llm = Arc::new(ScriptedLlm::new(script));
    let services = ServiceBundle::new(llm.clone(), lean());
    (llm, services)
}

pub fn config(max_iterations: usize, memory: MemoryStrategy) -> ProverConfig {
    ProverConfig {
        max_iterations,
        memory,
        ..Default::default()
    }
}

/// `n` small tasks of the form `theorem tI : I + 0 = I := by sorry`.
pub fn toy_tasks(n: usize) -> Vec<TheoremTask> {
    (0..n)
        .map(|i| {
            let t = format!("theorem t{i} (n : Nat) : n + {i} = {i} + n := by\n  sorry");
            TheoremTask::new(format!("t{i}"), t.clone(), format!("{t}\n")).unwrap()
        })
        .collect()
}

pub fn coin_services(p: f64) -> ServiceBundle {
    ServiceBundle::new(Arc::new(CoinFlipLlm::new(p)), Arc::new(MockLean::new(MockScript::default())))
}
