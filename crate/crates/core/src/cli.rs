//! Command-line entry points: `prove`, `bench` and `report`.
//!
//! Exit codes: `prove` returns 0 when proved, 1 when the iteration budget ran
//! out and 2 on a service error; every command returns 64 on usage errors
//! and 2 on runtime failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::agent::run_attempt_loop_with;
use crate::config::{parse_override, CliConfig, Settings};
use crate::harness::{
    build_report, comparison_table, read_ledger, run_benchmark, BenchOptions, DatasetManifest, LedgerContents,
    ReportOptions,
};
use crate::types::{AttemptRecord, Outcome, TheoremTask};

pub const EXIT_PROVED: i32 = 0;
pub const EXIT_EXHAUSTED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "leanloop", version, about = "Iterative LLM proof search for Lean 4, with a pass@k benchmark harness")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by all subcommands. Each one is shorthand for `--set key=value`.
#[derive(Debug, Args, Default)]
struct Common {
    /// Config file (default: ./leanloop.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Profile within the config file.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Override any config key, e.g. --set memory=history-5. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    /// none | history-N | self-managed
    #[arg(long, global = true)]
    memory: Option<String>,
    /// Comma-separated: library_search,web_search
    #[arg(long, global = true, value_delimiter = ',')]
    tools: Option<Vec<String>>,
    /// iterative | single_shot
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Token count or a provider level name.
    #[arg(long, global = true)]
    thinking_budget: Option<String>,
    /// Seconds.
    #[arg(long, global = true)]
    build_timeout: Option<f64>,
    /// echo | coin | scripted | anthropic
    #[arg(long, global = true)]
    llm: Option<String>,
    #[arg(long, global = true)]
    llm_script: Option<PathBuf>,
    /// mock | lake
    #[arg(long, global = true)]
    lean: Option<String>,
    #[arg(long, global = true)]
    lean_script: Option<PathBuf>,
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// Concurrent attempt loops (bench).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    build_jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one attempt loop on a theorem.
    Prove {
        file: PathBuf,
        theorem: String,
        /// Directory for the transcript and the proved file.
        #[arg(long, default_value = "leanloop-out")]
        out: PathBuf,
    },
    /// Run every task in a manifest, appending results to a ledger.
    Bench {
        manifest: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        /// Directory the manifest paths are relative to (default: the manifest's directory).
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue an existing ledger, skipping finished (task, sample) pairs.
        #[arg(long)]
        resume: bool,
        /// pass@k values to print after the run.
        #[arg(long, value_delimiter = ',')]
        k: Vec<u64>,
        /// Stop after this many new samples.
        #[arg(long, hide = true)]
        max_units: Option<usize>,
    },
    /// Statistics from one or more ledgers.
    Report {
        #[arg(required = true)]
        ledgers: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<u64>,
        #[arg(long, default_value_t = crate::harness::report::DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long)]
        bootstrap_seed: Option<u64>,
        /// Write the iteration curve CSV here (first ledger, or one file per ledger with an index suffix).
        #[arg(long)]
        curve_csv: Option<PathBuf>,
        #[arg(long)]
        pass_csv: Option<PathBuf>,
    },
}

struct Usage(String);

impl Common {
    fn cli_config(&self, extra: &[(&str, Option<toml::Value>)]) -> Result<CliConfig, Usage> {
        let mut c = CliConfig {
            config_file: self.config.clone(),
            profile: self.profile.clone(),
            overrides: Vec::new(),
        };
        for s in &self.set {
            c.overrides.push(parse_override(s).map_err(|e| Usage(e.to_string()))?);
        }
        let thinking = self.thinking_budget.as_ref().map(|t| match t.parse::<i64>() {
            Ok(n) => toml::Value::Integer(n),
            Err(_) => toml::Value::String(t.clone()),
        });
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| toml::Value::String(p.display().to_string()));
        let flags: Vec<(&str, Option<toml::Value>)> = vec![
            ("model", self.model.clone().map(Into::into)),
            ("max_iterations", self.max_iterations.map(|n| toml::Value::Integer(n as i64))),
            ("memory", self.memory.clone().map(Into::into)),
            (
                "tools",
                self.tools
                    .as_ref()
                    .map(|t| toml::Value::Array(t.iter().filter(|s| !s.is_empty()).map(|s| s.clone().into()).collect())),
            ),
            ("mode", self.mode.clone().map(|m| m.replace('-', "_").into())),
            ("thinking_budget", thinking),
            ("build_timeout", self.build_timeout.map(Into::into)),
            ("llm", self.llm.clone().map(Into::into)),
            ("llm_script", path(&self.llm_script)),
            ("lean", self.lean.clone().map(Into::into)),
            ("lean_script", path(&self.lean_script)),
            ("workspace", path(&self.workspace)),
            ("jobs", self.jobs.map(|n| toml::Value::Integer(n as i64))),
            ("build_jobs", self.build_jobs.map(|n| toml::Value::Integer(n as i64))),
        ];
        for (k, v) in flags.into_iter().chain(extra.iter().cloned()) {
            if let Some(v) = v {
                c.overrides.push((k.to_string(), v));
            }
        }
        Ok(c)
    }
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Prove { file, theorem, out: dir } => prove(&cli.common, file, theorem, dir, out),
        Command::Bench {
            manifest,
            ledger,
            root,
            samples,
            seed,
            resume,
            k,
            max_units,
        } => {
            let extra = [
                ("samples", samples.map(|n| toml::Value::Integer(n as i64))),
                ("seed", seed.map(|n| toml::Value::Integer(n as i64))),
            ];
            bench(&cli.common, &extra, manifest, ledger, root.as_deref(), *resume, k, *max_units, out)
        }
        Command::Report {
            ledgers,
            k,
            resamples,
            bootstrap_seed,
            curve_csv,
            pass_csv,
        } => report(&cli.common, ledgers, k, *resamples, *bootstrap_seed, curve_csv, pass_csv, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_ERROR
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u.0)
    }
}

fn settings(common: &Common, extra: &[(&str, Option<toml::Value>)]) -> Result<Settings, Failure> {
    common
        .cli_config(extra)?
        .resolve()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn io<E: std::fmt::Display>(what: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", what.display()))
}

fn status_line(a: &AttemptRecord) -> String {
    let status = serde_json::to_value(a.status)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let t = a.tokens();
    format!(
        "iteration {}: {} ({:.2}s, {} in / {} out / {} thinking tokens)",
        a.iteration, status, a.wall_time, t.input, t.output, t.thinking
    )
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn prove(common: &Common, file: &Path, theorem: &str, dir: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let s = settings(common, &[])?;
    let text = fs::read_to_string(file).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
    let task = TheoremTask::from_file(theorem, text, theorem)
        .map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
    let config = s.prover_config().map_err(|e| Failure::Usage(e.to_string()))?;
    let services = s.services().map_err(|e| Failure::Usage(e.to_string()))?;

    let mut observer = |_: &TheoremTask, a: &AttemptRecord| {
        let _ = writeln!(out, "{}", status_line(a));
        let _ = out.flush();
    };
    let result = run_attempt_loop_with(&task, &config, &services, &mut observer);

    fs::create_dir_all(dir).map_err(io(dir))?;
    let stem = sanitize(theorem);
    let transcript = dir.join(format!("{stem}.transcript.json"));
    let json = serde_json::to_string_pretty(&result).expect("result serializes");
    fs::write(&transcript, json).map_err(io(&transcript))?;
    let code = match &result.outcome {
        Outcome::Proved { iteration, final_source } => {
            let proved = dir.join(format!("{stem}.lean"));
            fs::write(&proved, final_source).map_err(io(&proved))?;
            let _ = writeln!(out, "proved at iteration {iteration}: {}", proved.display());
            EXIT_PROVED
        }
        Outcome::Exhausted => {
            let _ = writeln!(out, "exhausted after {} iterations", result.transcript.len());
            EXIT_EXHAUSTED
        }
        Outcome::Error { reason } => {
            let _ = writeln!(out, "error: {reason}");
            EXIT_ERROR
        }
    };
    let _ = writeln!(out, "cost: ${:.4}", result.total_cost);
    let _ = writeln!(out, "transcript: {}", transcript.display());
    Ok(code)
}

#[allow(clippy::too_many_arguments)]
fn bench(
    common: &Common,
    extra: &[(&str, Option<toml::Value>)],
    manifest_path: &Path,
    ledger: &Path,
    root: Option<&Path>,
    resume: bool,
    ks: &[u64],
    max_units: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let s = settings(common, extra)?;
    let manifest = DatasetManifest::load(manifest_path).map_err(|e| Failure::Usage(e.to_string()))?;
    let root = root
        .map(Path::to_path_buf)
        .unwrap_or_else(|| manifest_path.parent().map(Path::to_path_buf).unwrap_or_default());
    let tasks = manifest.load_tasks(&root).map_err(|e| Failure::Usage(e.to_string()))?;
    let config = s.prover_config().map_err(|e| Failure::Usage(e.to_string()))?;
    let services = s.services().map_err(|e| Failure::Usage(e.to_string()))?;
    let opts = BenchOptions {
        samples_per_task: s.samples,
        seed: s.seed,
        jobs: s.jobs,
        resume,
        max_units,
    };
    let summary = run_benchmark(&tasks, &manifest.name, &config, &services, ledger, &opts)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let _ = write!(out, "{}", summary.render());
    if !ks.is_empty() {
        let contents = read_ledger(ledger).map_err(|e| Failure::Runtime(e.to_string()))?;
        let r = build_report(
            &contents,
            &ReportOptions {
                ks: ks.to_vec(),
                prices: s.prices.clone(),
                ..Default::default()
            },
        )
        .map_err(|e| Failure::Runtime(e.to_string()))?;
        let _ = write!(out, "{}", r.pass_at_k_csv());
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn report(
    common: &Common,
    ledgers: &[PathBuf],
    ks: &[u64],
    resamples: usize,
    bootstrap_seed: Option<u64>,
    curve_csv: &Option<PathBuf>,
    pass_csv: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let s = settings(common, &[])?;
    let contents: Vec<LedgerContents> = ledgers
        .iter()
        .map(|p| read_ledger(p).map_err(|e| Failure::Runtime(e.to_string())))
        .collect::<Result<_, _>>()?;
    let opts = ReportOptions {
        ks: if ks.is_empty() {
            crate::harness::report::DEFAULT_KS.to_vec()
        } else {
            ks.to_vec()
        },
        resamples,
        bootstrap_seed,
        prices: s.prices.clone(),
    };
    let reports = contents
        .iter()
        .map(|c| build_report(c, &opts))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Runtime(e.to_string()))?;

    let labels: Vec<String> = ledgers.iter().map(|p| p.display().to_string()).collect();
    if reports.len() > 1 {
        let _ = writeln!(out, "comparison");
        let _ = write!(out, "{}", comparison_table(&labels, &reports));
        let _ = writeln!(out);
    }
    for (label, r) in labels.iter().zip(&reports) {
        if reports.len() > 1 {
            let _ = writeln!(out, "== {label}");
        }
        let _ = write!(out, "{}", r.render_text());
        if reports.len() > 1 {
            let _ = writeln!(out);
        }
    }
    let write_csv = |base: &Path, i: usize, body: String| -> Result<(), Failure> {
        let path = if reports.len() == 1 {
            base.to_path_buf()
        } else {
            let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
            let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
            base.with_file_name(format!("{stem}.{i}.{ext}"))
        };
        fs::write(&path, body).map_err(io(&path))
    };
    for (i, r) in reports.iter().enumerate() {
        if let Some(p) = curve_csv {
            write_csv(p, i, r.curve_csv())?;
        }
        if let Some(p) = pass_csv {
            write_csv(p, i, r.pass_at_k_csv())?;
        }
    }
    Ok(0)
}
