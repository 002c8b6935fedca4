//! Runs every (task, sample) unit through the attempt loop and records it.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ledger::{LedgerContents, LedgerError, LedgerHeader, LedgerRow, LedgerWriter, RowOutcome};
use crate::agent::{run_attempt_loop, ServiceBundle};
use crate::types::{Outcome, ProofResult, ProverConfig, TheoremTask};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchOptions {
    pub samples_per_task: usize,
    pub seed: u64,
    pub jobs: usize,
    pub resume: bool,
    /// Stop after this many new rows (used to simulate an interrupted run).
    pub max_units: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            samples_per_task: 1,
            seed: 0,
            jobs: 1,
            resume: false,
            max_units: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("invalid config: {0}")]
    Config(#[from] crate::types::ConfigError),
    #[error("ledger {path} was written with {found} (this run: {expected})")]
    Mismatch { path: PathBuf, expected: String, found: String },
    #[error("samples_per_task must be at least 1")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub ledger: PathBuf,
    pub tasks: usize,
    pub rows: usize,
    pub new_rows: usize,
    pub solved: usize,
    pub errors: usize,
    pub solved_fraction: f64,
    pub mean_cost_usd: f64,
}

impl BenchSummary {
    fn from_rows(ledger: &Path, rows: &[LedgerRow], new_rows: usize) -> Self {
        let tasks: BTreeSet<&str> = rows.iter().map(|r| r.task_id.as_str()).collect();
        let solved = rows.iter().filter(|r| r.outcome == RowOutcome::Proved).count();
        let errors = rows.iter().filter(|r| r.outcome == RowOutcome::Error).count();
        let n = rows.len();
        BenchSummary {
            ledger: ledger.to_path_buf(),
            tasks: tasks.len(),
            rows: n,
            new_rows,
            solved,
            errors,
            solved_fraction: if n == 0 { 0.0 } else { solved as f64 / n as f64 },
            mean_cost_usd: if n == 0 {
                0.0
            } else {
                rows.iter().map(|r| r.cost_usd).sum::<f64>() / n as f64
            },
        }
    }

    pub fn render(&self) -> String {
        format!(
            "tasks: {}\nsamples: {} ({} new)\nsolved: {}/{} ({:.1}%)\nerrors: {}\nmean cost per sample: ${:.4}\nledger: {}\n",
            self.tasks,
            self.rows,
            self.new_rows,
            self.solved,
            self.rows,
            100.0 * self.solved_fraction,
            self.errors,
            self.mean_cost_usd,
            self.ledger.display()
        )
    }
}

/// Seed for one unit, derived from the run seed so reruns repeat exactly.
pub fn unit_seed(seed: u64, task_id: &str, sample: usize) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{task_id}:{sample}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn run_unit(task: &TheoremTask, config: &ProverConfig, services: &ServiceBundle) -> ProofResult {
    match panic::catch_unwind(AssertUnwindSafe(|| run_attempt_loop(task, config, services))) {
        Ok(r) => r,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            ProofResult {
                task_id: task.id.clone(),
                outcome: Outcome::Error {
                    reason: format!("panic: {msg}"),
                },
                transcript: Vec::new(),
                total_cost: 0.0,
            }
        }
    }
}

/// Runs `tasks × samples_per_task` loops, appending each finished unit to
/// the ledger at `path`. With `resume`, units already in the ledger are
/// skipped. Only ledger I/O failures abort the run.
pub fn run_benchmark(
    tasks: &[TheoremTask],
    dataset: &str,
    config: &ProverConfig,
    services: &ServiceBundle,
    path: &Path,
    opts: &BenchOptions,
) -> Result<BenchSummary, BenchError> {
    config.validate()?;
    if opts.samples_per_task == 0 {
        return Err(BenchError::NoSamples);
    }
    let header = LedgerHeader::new(config, dataset, opts.samples_per_task, opts.seed);
    let (mut writer, previous) = if opts.resume && path.exists() {
        let (w, contents) = LedgerWriter::resume(path, &header.config_fingerprint)?;
        check_compatible(path, &contents, &header)?;
        (w, contents.rows)
    } else {
        (LedgerWriter::create(path, &header)?, Vec::new())
    };
    let done: BTreeSet<(String, usize)> = previous.iter().map(LedgerRow::key).collect();

    let units: Vec<(&TheoremTask, usize)> = tasks
        .iter()
        .flat_map(|t| (0..opts.samples_per_task).map(move |s| (t, s)))
        .filter(|(t, s)| !done.contains(&(t.id.clone(), *s)))
        .take(opts.max_units.unwrap_or(usize::MAX))
        .collect();

    let fingerprint = header.config_fingerprint.clone();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut written = Vec::new();
    let mut io_error = None;
    let (tx, rx) = mpsc::channel::<(usize, LedgerRow)>();

    std::thread::scope(|scope| {
        for _ in 0..opts.jobs.max(1).min(units.len().max(1)) {
            let tx = tx.clone();
            let (units, next, abort, fingerprint) = (&units, &next, &abort, &fingerprint);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(task, sample)) = units.get(i) else { break };
                let mut cfg = config.clone();
                cfg.sampling_seed = Some(unit_seed(opts.seed, &task.id, sample));
                let started = chrono::Utc::now().to_rfc3339();
                let result = run_unit(task, &cfg, services);
                let row = LedgerRow::from_result(&result, sample, fingerprint, started);
                if tx.send((i, row)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Single writer: rows land in completion order.
        for (_, row) in rx {
            if io_error.is_some() {
                continue;
            }
            match writer.append(&row) {
                Ok(()) => written.push(row),
                Err(e) => {
                    abort.store(true, Ordering::SeqCst);
                    io_error = Some(e);
                }
            }
        }
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let new_rows = written.len();
    let mut all = previous;
    all.extend(written);
    Ok(BenchSummary::from_rows(path, &all, new_rows))
}

fn check_compatible(path: &Path, old: &LedgerContents, new: &LedgerHeader) -> Result<(), BenchError> {
    let mismatch = |what: &str, found: String, expected: String| BenchError::Mismatch {
        path: path.to_path_buf(),
        expected: format!("{what} {expected}"),
        found: format!("{what} {found}"),
    };
    if old.header.seed != new.seed {
        return Err(mismatch("seed", old.header.seed.to_string(), new.seed.to_string()));
    }
    if old.header.samples_per_task != new.samples_per_task {
        return Err(mismatch(
            "samples_per_task",
            old.header.samples_per_task.to_string(),
            new.samples_per_task.to_string(),
        ));
    }
    Ok(())
}
