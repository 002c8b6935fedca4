//! Statistics over ledgers: pass@k tables, iteration curves, cost, and the
//! side-by-side view for several ledgers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::cost::{cost_report, CostError, CostReport, PriceTable};
use super::ledger::{LedgerContents, LedgerRow, RowOutcome};
use super::stats::{self, CurvePoint, RunSolves, StatsError};
use crate::types::{MemoryStrategy, ProverConfig};

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_KS: [u64; 4] = [1, 5, 10, 50];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub ks: Vec<u64>,
    pub resamples: usize,
    /// Defaults to the ledger's run seed.
    pub bootstrap_seed: Option<u64>,
    pub prices: PriceTable,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            ks: DEFAULT_KS.to_vec(),
            resamples: DEFAULT_RESAMPLES,
            bootstrap_seed: None,
            prices: PriceTable::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassRow {
    pub k: u64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRow {
    pub task_id: String,
    pub n: u64,
    pub c: u64,
    pub lo: f64,
    pub hi: f64,
    pub mean_solved_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub dataset: String,
    pub fingerprint: String,
    pub seed: u64,
    pub bootstrap_seed: u64,
    pub resamples: usize,
    pub config: ProverConfig,
    pub rows: usize,
    pub pass_at_k: Vec<PassRow>,
    /// Requested k values larger than the smallest per-task sample count.
    pub skipped_ks: Vec<u64>,
    pub tasks: Vec<TaskRow>,
    pub curve: Vec<CurvePoint>,
    /// Runs (sample indices) that cover every task.
    pub runs: usize,
    pub cost: Result<CostReport, CostError>,
}

/// (n, c) per task, in task-id order.
pub fn task_counts(rows: &[LedgerRow]) -> BTreeMap<String, (u64, u64)> {
    let mut m: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in rows {
        let e = m.entry(r.task_id.clone()).or_default();
        e.0 += 1;
        if r.outcome == RowOutcome::Proved {
            e.1 += 1;
        }
    }
    m
}

/// One run per sample index, keeping only sample indices present for every task.
pub fn runs_by_sample(rows: &[LedgerRow]) -> Vec<RunSolves> {
    let tasks: BTreeMap<&str, ()> = rows.iter().map(|r| (r.task_id.as_str(), ())).collect();
    let mut by_sample: BTreeMap<usize, RunSolves> = BTreeMap::new();
    for r in rows {
        by_sample
            .entry(r.sample)
            .or_default()
            .insert(r.task_id.clone(), r.solved_at);
    }
    by_sample.into_values().filter(|run| run.len() == tasks.len()).collect()
}

pub fn build_report(ledger: &LedgerContents, opts: &ReportOptions) -> Result<Report, StatsError> {
    let rows = &ledger.rows;
    let counts = task_counts(rows);
    let pairs: Vec<(u64, u64)> = counts.values().copied().collect();
    let min_n = pairs.iter().map(|p| p.0).min().unwrap_or(0);
    let bootstrap_seed = opts.bootstrap_seed.unwrap_or(ledger.header.seed);

    let mut ks: Vec<u64> = opts.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let (usable, skipped_ks): (Vec<u64>, Vec<u64>) = ks.into_iter().filter(|&k| k >= 1).partition(|&k| k <= min_n);
    let mut pass_at_k = Vec::new();
    for k in usable {
        let estimate = stats::dataset_pass_at_k(&pairs, k)?;
        let (lo, hi) = stats::bootstrap_pass_at_k(&pairs, k, opts.resamples, bootstrap_seed, 0.05)?;
        pass_at_k.push(PassRow { k, estimate, lo, hi });
    }

    let mut tasks = Vec::new();
    for (id, &(n, c)) in &counts {
        let (lo, hi) = stats::ci95(n, c)?;
        let solved: Vec<f64> = rows
            .iter()
            .filter(|r| &r.task_id == id)
            .filter_map(|r| r.solved_at.map(|s| s as f64))
            .collect();
        tasks.push(TaskRow {
            task_id: id.clone(),
            n,
            c,
            lo,
            hi,
            mean_solved_at: (!solved.is_empty()).then(|| solved.iter().sum::<f64>() / solved.len() as f64),
        });
    }

    let runs = runs_by_sample(rows);
    let curve = if runs.is_empty() {
        Vec::new()
    } else {
        stats::iteration_curve(&runs, ledger.header.config.max_iterations)?
    };

    Ok(Report {
        dataset: ledger.header.dataset.clone(),
        fingerprint: ledger.header.config_fingerprint.clone(),
        seed: ledger.header.seed,
        bootstrap_seed,
        resamples: opts.resamples,
        config: ledger.header.config.clone(),
        rows: rows.len(),
        pass_at_k,
        skipped_ks,
        tasks,
        curve,
        runs: runs.len(),
        cost: cost_report(rows, &opts.prices),
    })
}

pub fn memory_label(m: MemoryStrategy) -> String {
    match m {
        MemoryStrategy::None => "none".into(),
        MemoryStrategy::HistoryN(n) => format!("history-{n}"),
        MemoryStrategy::SelfManaged => "self-managed".into(),
    }
}

fn tools_label(c: &ProverConfig) -> String {
    if c.tools_enabled.is_empty() {
        "none".into()
    } else {
        c.tools_enabled.iter().map(|t| t.name()).collect::<Vec<_>>().join("+")
    }
}

impl Report {
    pub fn ci_note(&self) -> String {
        format!(
            "# CI: per-task Clopper-Pearson exact 95%; dataset pass@k 95% percentile bootstrap over tasks ({} resamples, seed {})",
            self.resamples, self.bootstrap_seed
        )
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# dataset: {}  config: {}  seed: {}", self.dataset, self.fingerprint, self.seed);
        let _ = writeln!(s, "{}", self.ci_note());
        let _ = writeln!(
            s,
            "# model: {}  memory: {}  tools: {}  max_iterations: {}",
            self.config.model,
            memory_label(self.config.memory),
            tools_label(&self.config),
            self.config.max_iterations
        );
        let _ = writeln!(s, "# rows: {}  tasks: {}  complete runs: {}", self.rows, self.tasks.len(), self.runs);
        let _ = writeln!(s);
        let _ = writeln!(s, "pass@k");
        let _ = writeln!(s, "{:>6}  {:>8}  {:>8}  {:>8}", "k", "estimate", "lo", "hi");
        for p in &self.pass_at_k {
            let _ = writeln!(s, "{:>6}  {:>8.4}  {:>8.4}  {:>8.4}", p.k, p.estimate, p.lo, p.hi);
        }
        if !self.skipped_ks.is_empty() {
            let ks: Vec<String> = self.skipped_ks.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "(skipped k = {}: more than the samples per task)", ks.join(", "));
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "per task");
        let _ = writeln!(s, "{:<32}  {:>5}  {:>5}  {:>8}  {:>8}  {:>8}", "task", "n", "c", "lo", "hi", "solve_it");
        for t in &self.tasks {
            let at = t.mean_solved_at.map_or("-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                s,
                "{:<32}  {:>5}  {:>5}  {:>8.4}  {:>8.4}  {:>8}",
                t.task_id, t.n, t.c, t.lo, t.hi, at
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "iteration curve (mean solved fraction, sem over runs)");
        s.push_str(&self.curve_csv());
        let _ = writeln!(s);
        let _ = writeln!(s, "cost");
        match &self.cost {
            Ok(c) => {
                for (m, usd) in &c.per_model {
                    let _ = writeln!(s, "  {m}: ${usd:.4}");
                }
                let _ = writeln!(s, "  total: ${:.4}", c.total_usd);
                let _ = writeln!(s, "  mean per sample: ${:.4}", c.mean_per_sample);
            }
            Err(e) => {
                let _ = writeln!(s, "  unavailable: {e}");
            }
        }
        s
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("iteration,mean,sem\n");
        for p in &self.curve {
            let _ = writeln!(s, "{},{:.6},{:.6}", p.iteration, p.mean, p.sem);
        }
        s
    }

    pub fn pass_at_k_csv(&self) -> String {
        let mut s = String::from("k,estimate,lo,hi\n");
        for p in &self.pass_at_k {
            let _ = writeln!(s, "{},{:.6},{:.6},{:.6}", p.k, p.estimate, p.lo, p.hi);
        }
        s
    }
}

/// One line per ledger; `labels` name the columns' sources (usually file names).
pub fn comparison_table(labels: &[String], reports: &[Report]) -> String {
    let mut s = String::new();
    if let Some(r) = reports.first() {
        let _ = writeln!(s, "{}", r.ci_note());
    }
    let _ = writeln!(
        s,
        "{:<24}  {:<10}  {:<14}  {:<28}  {:>5}  {:>6}  {:>7}  {:>18}  {:>10}  {:>10}",
        "ledger", "config", "memory", "tools", "iters", "tasks", "samples", "pass@1 [lo, hi]", "final", "usd/sample"
    );
    for (label, r) in labels.iter().zip(reports) {
        let p1 = r
            .pass_at_k
            .iter()
            .find(|p| p.k == 1)
            .map_or("-".to_string(), |p| format!("{:.3} [{:.3}, {:.3}]", p.estimate, p.lo, p.hi));
        let last = r.curve.last().map_or("-".to_string(), |c| format!("{:.3}", c.mean));
        let cost = r
            .cost
            .as_ref()
            .map_or("-".to_string(), |c| format!("{:.4}", c.mean_per_sample));
        let _ = writeln!(
            s,
            "{:<24}  {:<10}  {:<14}  {:<28}  {:>5}  {:>6}  {:>7}  {:>18}  {:>10}  {:>10}",
            label,
            r.fingerprint,
            memory_label(r.config.memory),
            tools_label(&r.config),
            r.config.max_iterations,
            r.tasks.len(),
            r.rows,
            p1,
            last,
            cost
        );
    }
    s
}
