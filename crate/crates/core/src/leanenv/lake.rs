use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{check_relative, parse_diagnostics, BuildJob, BuildReport, LeanBackend, LeanError};
use crate::types::{Diagnostic, Severity};

const SCRATCH_DIR: &str = ".leanloop-scratch";

/// A Lean package on disk plus the command used to check one file.
///
/// `build_command` is an argv list; `{file}` is replaced by the scratch file's
/// path relative to `root`.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub toolchain: String,
    pub build_command: Vec<String>,
}

impl Workspace {
    pub fn default_command() -> Vec<String> {
        ["lake", "env", "lean", "{file}"].map(String::from).to_vec()
    }

    /// Opens an existing package. Requires a lakefile; reads the toolchain pin
    /// from `lean-toolchain` when present.
    pub fn open(root: impl Into<PathBuf>, build_command: Option<Vec<String>>) -> Result<Self, LeanError> {
        let root = root.into();
        let has_lakefile = ["lakefile.lean", "lakefile.toml"]
            .iter()
            .any(|f| root.join(f).is_file());
        if !has_lakefile {
            return Err(LeanError::Workspace(format!(
                "{} has no lakefile.lean or lakefile.toml",
                root.display()
            )));
        }
        let toolchain = fs::read_to_string(root.join("lean-toolchain"))
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        Ok(Workspace {
            root,
            toolchain,
            build_command: build_command.unwrap_or_else(Self::default_command),
        })
    }

    pub fn scratch_root(&self) -> PathBuf {
        self.root.join(SCRATCH_DIR)
    }
}

/// Runs `build_command` in the workspace with a wall-clock timeout.
#[derive(Debug, Clone)]
pub struct LakeBackend {
    workspace: Workspace,
}

impl LakeBackend {
    pub fn new(workspace: Workspace) -> Self {
        LakeBackend { workspace }
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }
}

fn drain<R: Read + Send + 'static>(r: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut r) = r {
            let _ = r.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// `lake` runs `lean` as a child; kill the whole process group so no
/// grandchild keeps running or holds the output pipes open.
#[cfg(unix)]
fn kill_tree(child: &Child) {
    let _ = Command::new("kill")
        .args(["-KILL", "--", &format!("-{}", child.id())])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status();
}

#[cfg(not(unix))]
fn kill_tree(_child: &Child) {}

fn wait_with_timeout(child: &mut Child, timeout: Duration) -> std::io::Result<Option<std::process::ExitStatus>> {
    let deadline = Instant::now() + timeout;
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status));
        }
        if Instant::now() >= deadline {
            kill_tree(child);
            let _ = child.kill();
            let _ = child.wait();
            return Ok(None);
        }
        thread::sleep(Duration::from_millis(20));
    }
}

impl LeanBackend for LakeBackend {
    fn build(&self, job: &BuildJob<'_>) -> Result<BuildReport, LeanError> {
        check_relative(job.scratch)?;
        check_relative(job.relative_path)?;
        if job.source.trim().is_empty() {
            return Err(LeanError::EmptySource);
        }
        let rel: PathBuf = Path::new(SCRATCH_DIR).join(job.scratch).join(job.relative_path);
        let abs = self.workspace.root.join(&rel);
        if let Some(dir) = abs.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&abs, job.source)?;

        let rel_str = rel.to_string_lossy().into_owned();
        let argv: Vec<String> = self
            .workspace
            .build_command
            .iter()
            .map(|a| a.replace("{file}", &rel_str))
            .collect();
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| LeanError::Workspace("empty build command".into()))?;
        let started = Instant::now();
        let mut cmd = Command::new(program);
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        let mut child = cmd
            .args(args)
            .current_dir(&self.workspace.root)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| LeanError::Workspace(format!("cannot spawn `{program}`: {e}")))?;
        let out = drain(child.stdout.take());
        let err = drain(child.stderr.take());
        let status = wait_with_timeout(&mut child, job.timeout)?;
        let mut raw = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();
        if !stderr.is_empty() {
            if !raw.is_empty() && !raw.ends_with('\n') {
                raw.push('\n');
            }
            raw.push_str(&stderr);
        }
        let duration = started.elapsed().as_secs_f64();
        let mut diagnostics = parse_diagnostics(&raw);
        let report = match status {
            None => {
                diagnostics.push(Diagnostic {
                    file: rel_str,
                    line: 1,
                    column: 0,
                    severity: Severity::Error,
                    message: format!("build timed out after {} s", job.timeout.as_secs_f64()),
                });
                BuildReport {
                    success: false,
                    diagnostics,
                    duration,
                    timed_out: true,
                    raw_output: raw,
                    queue_wait: 0.0,
                }
            }
            Some(status) => {
                let has_errors = diagnostics.iter().any(Diagnostic::is_error);
                if !status.success() && !has_errors {
                    diagnostics.push(Diagnostic {
                        file: rel_str,
                        line: 1,
                        column: 0,
                        severity: Severity::Error,
                        message: format!("build command failed ({status}) without diagnostics"),
                    });
                }
                BuildReport {
                    success: status.success() && !has_errors,
                    diagnostics,
                    duration,
                    timed_out: false,
                    raw_output: raw,
                    queue_wait: 0.0,
                }
            }
        };
        Ok(report)
    }
}
