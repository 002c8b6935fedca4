//! Runs a small benchmark against the coin-flip mock model, then builds the
//! pass@k report from the ledger on disk.

use leanloop::agent::ServiceBundle;
use leanloop::harness::{build_report, read_ledger, run_benchmark, BenchOptions, ReportOptions};
use leanloop::leanenv::{MockLean, MockScript};
use leanloop::llm::CoinFlipLlm;
use leanloop::types::{MemoryStrategy, ProverConfig, TheoremTask};
use std::sync::Arc;

fn main() {
    let tasks: Vec<TheoremTask> = (0..6)
        .map(|i| {
            let t = format!("theorem t{i} (n : Nat) : n + {i} = {i} + n := by\n  sorry");
            TheoremTask::new(format!("t{i}"), t.clone(), format!("{t}\n")).unwrap()
        })
        .collect();
    let services = ServiceBundle::new(Arc::new(CoinFlipLlm::new(0.15)), Arc::new(MockLean::new(MockScript::default())));
    let config = ProverConfig {
        max_iterations: 4,
        memory: MemoryStrategy::HistoryN(2),
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.jsonl");
    let opts = BenchOptions {
        samples_per_task: 20,
        seed: 1,
        jobs: 4,
        ..Default::default()
    };
    let summary = run_benchmark(&tasks, "toy", &config, &services, &path, &opts).unwrap();
    println!("{}\n", summary.render());

    let ledger = read_ledger(&path).unwrap();
    let report = build_report(
        &ledger,
        &ReportOptions {
            ks: vec![1, 5, 10],
            resamples: 2_000,
            ..Default::default()
        },
    )
    .unwrap();
    print!("{}", report.render_text());
}
