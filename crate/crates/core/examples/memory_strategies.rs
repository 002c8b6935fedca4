//! Shows what each memory strategy carries into the next proposer prompt.

use leanloop::llm::{FnLlm, LlmRequest, LlmResponse};
use leanloop::memory::MemoryState;
use leanloop::types::{AttemptRecord, AttemptStatus, MemoryStrategy, ProofProposal, ProverConfig, TokenUsage};

fn attempt(i: usize, tactic: &str, feedback: &str) -> AttemptRecord {
    AttemptRecord {
        iteration: i,
        proposal: ProofProposal {
            reasoning: format!("attempt {i}: try {tactic}"),
            updated_theorem: format!("theorem add_zero (n : Nat) : n + 0 = n := by\n  {tactic}"),
            ..Default::default()
        },
        feedback: feedback.into(),
        status: AttemptStatus::BuildFailed,
        usage: Vec::new(),
        wall_time: 0.0,
    }
}

fn main() {
    let config = ProverConfig::default();
    let attempts = [
        attempt(1, "rfl", "error: The rfl tactic failed"),
        attempt(2, "simp [Nat.add]", "error: simp made no progress"),
        attempt(3, "exact Nat.add_zero", "error: type mismatch"),
    ];
    // The reflection model just counts what it has seen.
    let reflector = FnLlm(|r: &LlmRequest| {
        let seen = r.messages.last().map(|m| m.content.matches("<attempt>").count()).unwrap_or(0);
        Ok(LlmResponse::text(format!("- reflected on {seen} attempt(s); avoid rfl and simp here"), TokenUsage::new(400, 40, 0)))
    });

    for strategy in [MemoryStrategy::None, MemoryStrategy::HistoryN(2), MemoryStrategy::SelfManaged] {
        let mut mem = MemoryState::new(strategy, config.notes_cap, config.render_budget);
        for a in &attempts {
            mem.update(a, &reflector, &config);
        }
        println!("==== {strategy:?}");
        for block in mem.render() {
            println!("{block}\n");
        }
    }
}
