//! Runs the attempt loop against a scripted model and a mock Lean backend.
//!
//! The first proposal does not compile, the second leaves a `sorry`, the third
//! is approved.

use std::sync::Arc;

use leanloop::agent::{run_attempt_loop_with, ServiceBundle};
use leanloop::leanenv::{BuildReport, MockLean, MockScript};
use leanloop::llm::{ScriptFile, ScriptedLlm, ScriptedReply};
use leanloop::types::{AttemptRecord, Diagnostic, MemoryStrategy, ProverConfig, Severity, TheoremTask};

const TARGET: &str = "theorem add_zero (n : Nat) : n + 0 = n := sorry";

fn answer(body: &str) -> ScriptedReply {
    ScriptedReply::text(format!(
        "reasoning: try `{body}`\nimports: []\nopens: []\nupdated_theorem:\n```lean\ntheorem add_zero (n : Nat) : n + 0 = n := by\n  {body}\n```"
    ))
}

fn main() {
    let task = TheoremTask::new("add_zero", TARGET, format!("{TARGET}\n")).unwrap();
    let llm = ScriptedLlm::new(ScriptFile {
        proposer: vec![answer("exact Nat.add_zer n"), answer("sorry"), answer("omega")],
        reviewer: vec![ScriptedReply::text(
            "check1: True, check2: True, check3: True, approved: True\nreasoning: closes the goal",
        )],
        default: Some(ScriptedReply::text("- omega handles linear Nat goals")),
        ..Default::default()
    });
    let lean = MockLean::new(MockScript::default().rule(
        &["Nat.add_zer "],
        BuildReport::failed(vec![Diagnostic {
            file: String::new(),
            line: 2,
            column: 8,
            severity: Severity::Error,
            message: "unknown constant 'Nat.add_zer'".into(),
        }]),
    ));
    let services = ServiceBundle::new(Arc::new(llm), Arc::new(lean));
    let config = ProverConfig {
        max_iterations: 5,
        memory: MemoryStrategy::HistoryN(3),
        ..Default::default()
    };

    let result = run_attempt_loop_with(&task, &config, &services, &mut |_: &TheoremTask, a: &AttemptRecord| {
        println!("iteration {}: {:?}", a.iteration, a.status);
        for line in a.feedback.lines().take(3) {
            println!("    {line}");
        }
    });
    println!("outcome: {:?}", result.outcome);
    if let Some(p) = result.final_proposal() {
        println!("\n{}", p.updated_theorem);
    }
}
