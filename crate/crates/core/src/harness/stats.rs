//! pass@k, confidence intervals and per-iteration curves.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::beta::beta_reg;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("invalid counts: {0}")]
    Domain(String),
    #[error("runs cover different task sets")]
    MismatchedRuns,
    #[error("no runs")]
    NoRuns,
}

/// Unbiased pass@k: 1 - C(n-c, k) / C(n, k), as a running product.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, StatsError> {
    if c > n || k == 0 || k > n {
        return Err(StatsError::Domain(format!("need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0f64;
    for i in 0..k {
        miss *= (n - c - i) as f64 / (n - i) as f64;
    }
    Ok(1.0 - miss)
}

/// Smallest x in [0, 1] with beta_reg(a, b, x) >= q, by bisection.
fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper-Pearson) two-sided interval at level `1 - alpha`.
pub fn clopper_pearson(n: u64, c: u64, alpha: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 || c > n {
        return Err(StatsError::Domain(format!("need n >= 1 and c <= n, got n={n} c={c}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Domain(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let (nf, cf) = (n as f64, c as f64);
    let lo = if c == 0 {
        0.0
    } else {
        beta_quantile(cf, nf - cf + 1.0, alpha / 2.0)
    };
    let hi = if c == n {
        1.0
    } else {
        beta_quantile(cf + 1.0, nf - cf, 1.0 - alpha / 2.0)
    };
    Ok((lo, hi))
}

pub fn ci95(n: u64, c: u64) -> Result<(f64, f64), StatsError> {
    clopper_pearson(n, c, 0.05)
}

/// Mean pass@k over tasks, each given as (samples, successes).
pub fn dataset_pass_at_k(tasks: &[(u64, u64)], k: u64) -> Result<f64, StatsError> {
    if tasks.is_empty() {
        return Err(StatsError::Domain("no tasks".into()));
    }
    let mut sum = 0.0;
    for &(n, c) in tasks {
        sum += pass_at_k(n, c, k)?;
    }
    Ok(sum / tasks.len() as f64)
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

/// Percentile bootstrap over tasks for dataset-level pass@k.
pub fn bootstrap_pass_at_k(
    tasks: &[(u64, u64)],
    k: u64,
    resamples: usize,
    seed: u64,
    alpha: f64,
) -> Result<(f64, f64), StatsError> {
    if tasks.is_empty() || resamples == 0 {
        return Err(StatsError::Domain("bootstrap needs tasks and at least one resample".into()));
    }
    let per_task: Vec<f64> = tasks
        .iter()
        .map(|&(n, c)| pass_at_k(n, c, k))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = per_task.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..m).map(|_| per_task[rng.gen_range(0..m)]).sum::<f64>() / m as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    Ok((percentile(&means, alpha / 2.0), percentile(&means, 1.0 - alpha / 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean: f64,
    pub sem: f64,
}

/// One run: task id to the iteration it was solved at, if any.
pub type RunSolves = BTreeMap<String, Option<usize>>;

/// Mean fraction of tasks solved by iteration t across runs, with the
/// standard error of the mean (sample std / sqrt(runs); 0 for one run).
pub fn iteration_curve(runs: &[RunSolves], max_iteration: usize) -> Result<Vec<CurvePoint>, StatsError> {
    let first = runs.first().ok_or(StatsError::NoRuns)?;
    let tasks: BTreeSet<&String> = first.keys().collect();
    if runs.iter().any(|r| r.keys().collect::<BTreeSet<_>>() != tasks) {
        return Err(StatsError::MismatchedRuns);
    }
    let n_tasks = tasks.len().max(1) as f64;
    let r = runs.len() as f64;
    Ok((1..=max_iteration)
        .map(|t| {
            let fracs: Vec<f64> = runs
                .iter()
                .map(|run| run.values().filter(|s| s.is_some_and(|i| i <= t)).count() as f64 / n_tasks)
                .collect();
            let mean = fracs.iter().sum::<f64>() / r;
            let sem = if runs.len() < 2 {
                0.0
            } else {
                let var = fracs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (r - 1.0);
                var.sqrt() / r.sqrt()
            };
            CurvePoint { iteration: t, mean, sem }
        })
        .collect())
}
