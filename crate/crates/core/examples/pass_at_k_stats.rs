//! Unbiased pass@k, exact per-task intervals, a task-level bootstrap, and a
//! solve-rate curve across runs.

use std::collections::BTreeMap;

use leanloop::harness::{bootstrap_pass_at_k, ci95, dataset_pass_at_k, iteration_curve, pass_at_k};

fn main() {
    // (samples, successes) per task.
    let tasks = [(50u64, 5u64), (50, 0), (50, 31), (50, 1), (50, 50)];
    for (i, &(n, c)) in tasks.iter().enumerate() {
        let (lo, hi) = ci95(n, c).unwrap();
        println!(
            "task {i}: {c}/{n}  pass@1 {:.3}  pass@10 {:.3}  95% CI [{lo:.3}, {hi:.3}]",
            pass_at_k(n, c, 1).unwrap(),
            pass_at_k(n, c, 10).unwrap()
        );
    }
    for k in [1, 5, 10, 50] {
        let est = dataset_pass_at_k(&tasks, k).unwrap();
        let (lo, hi) = bootstrap_pass_at_k(&tasks, k, 10_000, 7, 0.05).unwrap();
        println!("dataset pass@{k}: {est:.3} [{lo:.3}, {hi:.3}]");
    }

    // Iteration at which each task was solved, for three runs.
    let run = |s: [Option<usize>; 3]| -> BTreeMap<String, Option<usize>> {
        s.iter().enumerate().map(|(i, v)| (format!("t{i}"), *v)).collect()
    };
    let runs = [run([Some(1), None, Some(4)]), run([Some(2), Some(3), None]), run([Some(1), None, None])];
    println!("\niteration,mean,sem");
    for p in iteration_curve(&runs, 5).unwrap() {
        println!("{},{:.4},{:.4}", p.iteration, p.mean, p.sem);
    }
}
