//! Benchmark orchestration, run ledgers and statistics.

pub mod bench;
pub mod cost;
pub mod ledger;
pub mod manifest;
pub mod report;
pub mod stats;

pub use bench::{run_benchmark, unit_seed, BenchError, BenchOptions, BenchSummary};
pub use cost::{cost_report, CostError, CostReport, ModelPrice, PriceTable};
pub use ledger::{read_ledger, LedgerContents, LedgerError, LedgerHeader, LedgerRow, LedgerWriter, RowOutcome};
pub use manifest::{DatasetManifest, ManifestEntry, ManifestError};
pub use report::{build_report, comparison_table, Report, ReportOptions};
pub use stats::{
    bootstrap_pass_at_k, ci95, clopper_pearson, dataset_pass_at_k, iteration_curve, pass_at_k, CurvePoint,
    RunSolves, StatsError,
};
