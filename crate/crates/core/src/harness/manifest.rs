//! Dataset manifests: which files to load and which theorem in each.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::types::{TaskError, TheoremTask};

/// The frozen 100-problem PutnamBench subset used for ablations.
pub const ABLATION_MANIFEST: &str = include_str!("../../data/putnam_ablation_100.toml");

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
    #[error("task `{id}`: file {path} does not exist")]
    MissingFile { id: String, path: PathBuf },
    #[error("task `{id}`: {source}")]
    Task {
        id: String,
        #[source]
        source: TaskError,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VersionPins {
    #[serde(default)]
    pub lean_toolchain: String,
    #[serde(default)]
    pub mathlib_commit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the manifest root.
    pub path: PathBuf,
    /// Declaration name inside the file; defaults to `id`.
    #[serde(default)]
    pub theorem: Option<String>,
}

impl ManifestEntry {
    pub fn theorem_name(&self) -> &str {
        self.theorem.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default)]
    pub version: String,
    #[serde(default)]
    pub provenance: String,
    #[serde(default)]
    pub pins: VersionPins,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let m: DatasetManifest = toml::from_str(text)?;
        m.check_ids()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn ablation() -> Self {
        Self::parse(ABLATION_MANIFEST).expect("embedded manifest is valid")
    }

    fn check_ids(&self) -> Result<(), ManifestError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(ManifestError::DuplicateId(e.id.clone()));
            }
        }
        Ok(())
    }

    /// Reports the first entry whose file is missing under `root`.
    pub fn check_paths(&self, root: &Path) -> Result<(), ManifestError> {
        for e in &self.entries {
            let p = root.join(&e.path);
            if !p.is_file() {
                return Err(ManifestError::MissingFile { id: e.id.clone(), path: p });
            }
        }
        Ok(())
    }

    /// Reads every entry's file and locates its theorem.
    pub fn load_tasks(&self, root: &Path) -> Result<Vec<TheoremTask>, ManifestError> {
        self.check_paths(root)?;
        self.entries
            .iter()
            .map(|e| {
                let p = root.join(&e.path);
                let text = fs::read_to_string(&p).map_err(|source| ManifestError::Io { path: p, source })?;
                let mut task = TheoremTask::from_file(e.id.clone(), text, e.theorem_name())
                    .map_err(|source| ManifestError::Task { id: e.id.clone(), source })?;
                task.dataset = self.name.clone();
                Ok(task)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_manifest_is_frozen() {
        let m = DatasetManifest::ablation();
        assert_eq!(m.entries.len(), 100);
        assert_eq!(m.entries[0].id, "putnam_1962_a1");
        assert!(m.pins.lean_toolchain.contains("4.24"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "name = \"x\"\n[[entries]]\nid = \"a\"\npath = \"a.lean\"\n[[entries]]\nid = \"a\"\npath = \"b.lean\"\n";
        assert!(matches!(DatasetManifest::parse(text), Err(ManifestError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn loads_tasks_and_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.lean"), "theorem t1 : 1 = 1 := by\n  sorry\n").unwrap();
        let text = "name = \"toy\"\n[[entries]]\nid = \"a\"\npath = \"a.lean\"\ntheorem = \"t1\"\n";
        let m = DatasetManifest::parse(text).unwrap();
        let tasks = m.load_tasks(dir.path()).unwrap();
        assert_eq!(tasks[0].target_theorem, "theorem t1 : 1 = 1 := by\n  sorry");
        assert_eq!(tasks[0].dataset, "toy");

        let missing = DatasetManifest::parse("name = \"toy\"\n[[entries]]\nid = \"b\"\npath = \"b.lean\"\n").unwrap();
        assert!(matches!(missing.load_tasks(dir.path()), Err(ManifestError::MissingFile { .. })));
    }
}
