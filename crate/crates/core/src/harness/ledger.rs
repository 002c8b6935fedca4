//! Append-only JSONL run ledger.
//!
//! Line 1 is a header record; every further line is one (task, sample) row.
//!
//! ```text
//! {"record":"header","schema_version":1,"config_fingerprint":"…","seed":7,…}
//! {"record":"row","task_id":"putnam_1962_a1","sample":0,"outcome":"proved",…}
//! ```
//!
//! A line cut short by a crash (no trailing newline, not valid JSON) is
//! dropped when the ledger is resumed.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::types::{AttemptStatus, ModelUsage, Outcome, ProofResult, ProverConfig, TokenUsage};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{0}: ledger already exists (resume it or choose another path)")]
    Exists(PathBuf),
    #[error("{path}: config fingerprint {found} does not match this run ({expected})")]
    FingerprintMismatch { path: PathBuf, expected: String, found: String },
    #[error("{path}: unsupported schema version {found}")]
    Schema { path: PathBuf, found: u32 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LedgerError + '_ {
    move |source| LedgerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub schema_version: u32,
    pub config_fingerprint: String,
    pub seed: u64,
    pub samples_per_task: usize,
    pub dataset: String,
    pub config: ProverConfig,
    #[serde(default)]
    pub created_at: String,
}

impl LedgerHeader {
    pub fn new(config: &ProverConfig, dataset: &str, samples_per_task: usize, seed: u64) -> Self {
        LedgerHeader {
            schema_version: SCHEMA_VERSION,
            config_fingerprint: config.fingerprint(),
            seed,
            samples_per_task,
            dataset: dataset.to_string(),
            config: config.clone(),
            created_at: chrono::Utc::now().to_rfc3339(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOutcome {
    Proved,
    Exhausted,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub status: AttemptStatus,
    pub usage: Vec<ModelUsage>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub task_id: String,
    pub sample: usize,
    pub config_fingerprint: String,
    pub outcome: RowOutcome,
    pub solved_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub iterations: Vec<IterationRow>,
    pub cost_usd: f64,
    pub started_at: String,
    pub finished_at: String,
}

impl LedgerRow {
    pub fn from_result(result: &ProofResult, sample: usize, fingerprint: &str, started_at: String) -> Self {
        let (outcome, error) = match &result.outcome {
            Outcome::Proved { .. } => (RowOutcome::Proved, None),
            Outcome::Exhausted => (RowOutcome::Exhausted, None),
            Outcome::Error { reason } => (RowOutcome::Error, Some(reason.clone())),
        };
        LedgerRow {
            task_id: result.task_id.clone(),
            sample,
            config_fingerprint: fingerprint.to_string(),
            outcome,
            solved_at: result.solved_at(),
            error,
            iterations: result
                .transcript
                .iter()
                .map(|a| IterationRow {
                    iteration: a.iteration,
                    status: a.status,
                    usage: a.usage.clone(),
                    wall_time: a.wall_time,
                })
                .collect(),
            cost_usd: result.total_cost,
            started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn key(&self) -> (String, usize) {
        (self.task_id.clone(), self.sample)
    }

    pub fn tokens(&self) -> TokenUsage {
        let mut t = TokenUsage::default();
        for u in self.iterations.iter().flat_map(|i| i.usage.iter()) {
            t += u.tokens;
        }
        t
    }

    /// The row without clock-dependent fields (timestamps and wall times).
    pub fn deterministic(&self) -> LedgerRow {
        let mut r = self.clone();
        r.started_at.clear();
        r.finished_at.clear();
        for i in &mut r.iterations {
            i.wall_time = 0.0;
        }
        r
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(LedgerHeader),
    Row(LedgerRow),
}

/// A ledger read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerContents {
    pub header: LedgerHeader,
    pub rows: Vec<LedgerRow>,
}

impl LedgerContents {
    pub fn completed(&self) -> BTreeSet<(String, usize)> {
        self.rows.iter().map(LedgerRow::key).collect()
    }
}

fn parse(path: &Path, text: &str, tolerate_torn_tail: bool) -> Result<(LedgerContents, usize), LedgerError> {
    let mut header = None;
    let mut rows = Vec::new();
    let mut valid_len = 0;
    let mut offset = 0;
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let line_no = i + 1;
        offset += raw.len();
        let complete = raw.ends_with('\n');
        let body = raw.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            valid_len = offset;
            continue;
        }
        let parsed: Result<Line, _> = serde_json::from_str(body);
        let line = match parsed {
            Ok(l) => l,
            Err(_) if tolerate_torn_tail && !complete => break,
            Err(e) => {
                return Err(LedgerError::Malformed {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        match (line, &header) {
            (Line::Header(h), None) => {
                if h.schema_version != SCHEMA_VERSION {
                    return Err(LedgerError::Schema {
                        path: path.to_path_buf(),
                        found: h.schema_version,
                    });
                }
                header = Some(h);
            }
            (Line::Header(_), Some(_)) => {
                return Err(LedgerError::Malformed {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: "second header record".into(),
                })
            }
            (Line::Row(_), None) => {
                return Err(LedgerError::Malformed {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: "row before header".into(),
                })
            }
            (Line::Row(r), Some(h)) => {
                if r.config_fingerprint != h.config_fingerprint {
                    return Err(LedgerError::Malformed {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: format!("row fingerprint {} differs from header", r.config_fingerprint),
                    });
                }
                rows.push(r);
            }
        }
        valid_len = offset;
    }
    let header = header.ok_or_else(|| LedgerError::Malformed {
        path: path.to_path_buf(),
        line: 1,
        message: "missing header record".into(),
    })?;
    Ok((LedgerContents { header, rows }, valid_len))
}

/// Reads a ledger strictly: any malformed line is an error naming its number.
pub fn read_ledger(path: &Path) -> Result<LedgerContents, LedgerError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse(path, &text, false)?.0)
}

/// Single writer; every append is flushed before returning.
#[derive(Debug)]
pub struct LedgerWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

fn to_line(line: &Line) -> String {
    let mut s = serde_json::to_string(line).expect("ledger records serialize");
    s.push('\n');
    s
}

impl LedgerWriter {
    /// Starts a new ledger; refuses to overwrite an existing one.
    pub fn create(path: &Path, header: &LedgerHeader) -> Result<Self, LedgerError> {
        if path.exists() {
            return Err(LedgerError::Exists(path.to_path_buf()));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(io_err(path))?;
        let mut w = LedgerWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.write(&Line::Header(header.clone()))?;
        Ok(w)
    }

    /// Reopens an existing ledger for appending. A torn final line is cut
    /// off; the fingerprint must match `expected_fingerprint`.
    pub fn resume(path: &Path, expected_fingerprint: &str) -> Result<(Self, LedgerContents), LedgerError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let (contents, valid_len) = parse(path, &text, true)?;
        if contents.header.config_fingerprint != expected_fingerprint {
            return Err(LedgerError::FingerprintMismatch {
                path: path.to_path_buf(),
                expected: expected_fingerprint.to_string(),
                found: contents.header.config_fingerprint.clone(),
            });
        }
        let file = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        file.set_len(valid_len as u64).map_err(io_err(path))?;
        let mut file = file;
        use std::io::Seek;
        file.seek(std::io::SeekFrom::End(0)).map_err(io_err(path))?;
        let mut w = LedgerWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        // A complete last line may still lack its newline if the crash hit between writes.
        if valid_len > 0 && !text[..valid_len].ends_with('\n') {
            w.out.write_all(b"\n").map_err(io_err(path))?;
            w.out.flush().map_err(io_err(path))?;
        }
        Ok((w, contents))
    }

    fn write(&mut self, line: &Line) -> Result<(), LedgerError> {
        self.out.write_all(to_line(line).as_bytes()).map_err(io_err(&self.path))?;
        self.out.flush().map_err(io_err(&self.path))
    }

    pub fn append(&mut self, row: &LedgerRow) -> Result<(), LedgerError> {
        self.write(&Line::Row(row.clone()))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::CallRole;

    fn row(task: &str, sample: usize, fp: &str) -> LedgerRow {
        LedgerRow {
            task_id: task.into(),
            sample,
            config_fingerprint: fp.into(),
            outcome: RowOutcome::Proved,
            solved_at: Some(2),
            error: None,
            iterations: vec![IterationRow {
                iteration: 1,
                status: AttemptStatus::BuildFailed,
                usage: vec![ModelUsage {
                    model: "m".into(),
                    role: CallRole::Proposer,
                    tokens: TokenUsage::new(1, 2, 3),
                }],
                wall_time: 0.25,
            }],
            cost_usd: 0.1 + 0.2,
            started_at: "s".into(),
            finished_at: "f".into(),
        }
    }

    fn header() -> LedgerHeader {
        LedgerHeader::new(&ProverConfig::default(), "toy", 2, 7)
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.jsonl");
        let h = header();
        let mut w = LedgerWriter::create(&p, &h).unwrap();
        let r = row("a", 0, &h.config_fingerprint);
        w.append(&r).unwrap();
        drop(w);
        let c = read_ledger(&p).unwrap();
        assert_eq!(c.header, h);
        assert_eq!(c.rows, vec![r]);
        assert!(matches!(LedgerWriter::create(&p, &h), Err(LedgerError::Exists(_))));
    }

    #[test]
    fn torn_tail_is_dropped_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.jsonl");
        let h = header();
        let mut w = LedgerWriter::create(&p, &h).unwrap();
        w.append(&row("a", 0, &h.config_fingerprint)).unwrap();
        drop(w);
        let mut f = OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(b"{\"record\":\"row\",\"task_id\":\"b\",\"sam").unwrap();
        drop(f);
        assert!(matches!(read_ledger(&p), Err(LedgerError::Malformed { line: 3, .. })));

        let (mut w, contents) = LedgerWriter::resume(&p, &h.config_fingerprint).unwrap();
        assert_eq!(contents.rows.len(), 1);
        w.append(&row("b", 0, &h.config_fingerprint)).unwrap();
        drop(w);
        let c = read_ledger(&p).unwrap();
        assert_eq!(c.rows.iter().map(|r| r.task_id.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn resume_checks_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.jsonl");
        LedgerWriter::create(&p, &header()).unwrap();
        assert!(matches!(
            LedgerWriter::resume(&p, "deadbeef"),
            Err(LedgerError::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn malformed_middle_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.jsonl");
        let h = header();
        let mut text = to_line(&Line::Header(h.clone()));
        text.push_str("not json\n");
        text.push_str(&to_line(&Line::Row(row("a", 0, &h.config_fingerprint))));
        fs::write(&p, text).unwrap();
        let err = read_ledger(&p).unwrap_err();
        assert!(matches!(err, LedgerError::Malformed { line: 2, .. }));
        assert!(err.to_string().contains("run.jsonl:2:"));
        // Only a torn final line is forgiven on resume.
        assert!(LedgerWriter::resume(&p, &h.config_fingerprint).is_err());
    }

    #[test]
    fn deterministic_view_drops_clock_fields() {
        let a = row("a", 0, "x");
        let mut b = a.clone();
        b.started_at = "other".into();
        b.iterations[0].wall_time = 9.0;
        assert_ne!(a, b);
        assert_eq!(a.deterministic(), b.deterministic());
    }
}
