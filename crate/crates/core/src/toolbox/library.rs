use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{PremiseHit, ToolError};

pub trait LibrarySearch: Send + Sync {
    /// At most `limit` hits, best first.
    fn search(&self, query: &str, limit: usize) -> Result<Vec<PremiseHit>, ToolError>;
}

fn check(query: &str, limit: usize) -> Result<(), ToolError> {
    if limit == 0 {
        return Err(ToolError::Invalid("limit must be at least 1".into()));
    }
    if query.trim().is_empty() {
        return Err(ToolError::Invalid("empty query".into()));
    }
    Ok(())
}

/// Sorts by descending score, then name; clamps scores into [0, 1].
fn finish(mut hits: Vec<PremiseHit>, limit: usize) -> Vec<PremiseHit> {
    for h in &mut hits {
        h.score = if h.score.is_nan() { 0.0 } else { h.score.clamp(0.0, 1.0) };
    }
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
    hits.truncate(limit);
    hits
}

/// Client for a premise-search service.
///
/// Request: `POST {endpoint}` with body `{"query": "...", "limit": 10}`.
/// Response: `{"results": [{"name", "statement", "score", "module"}]}`.
#[derive(Debug, Clone)]
pub struct HttpLibrarySearch {
    endpoint: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct SearchResponse {
    #[serde(default)]
    results: Vec<PremiseHit>,
}

impl HttpLibrarySearch {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ToolError::Unavailable(e.to_string()))?;
        Ok(HttpLibrarySearch {
            endpoint: endpoint.into(),
            client,
        })
    }
}

impl LibrarySearch for HttpLibrarySearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<PremiseHit>, ToolError> {
        check(query, limit)?;
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "query": query, "limit": limit }))
            .send()
            .map_err(|e| ToolError::Unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ToolError::Unavailable(format!("HTTP {}", resp.status())));
        }
        let body: SearchResponse = resp
            .json()
            .map_err(|e| ToolError::Unavailable(format!("bad response: {e}")))?;
        Ok(finish(body.results, limit))
    }
}

/// A row of the mock index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PremiseEntry {
    pub name: String,
    pub statement: String,
    #[serde(default)]
    pub module: String,
}

#[derive(Deserialize)]
struct PremiseTable {
    premises: Vec<PremiseEntry>,
}

/// In-memory index scored by exact substring plus token overlap.
///
/// score = 0.5 * [normalized query is a substring of name or statement]
///       + 0.5 * |query tokens ∩ entry tokens| / |query tokens|
///
/// Entries sharing no token with the query are not returned.
#[derive(Debug, Clone, Default)]
pub struct MockLibrarySearch {
    entries: Vec<PremiseEntry>,
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn entry_tokens(e: &PremiseEntry) -> BTreeSet<String> {
    let mut t: BTreeSet<String> = normalize(&e.statement).split(' ').map(String::from).collect();
    let name = e.name.to_lowercase();
    t.insert(name.clone());
    t.extend(name.split(['.', '_']).map(String::from));
    t
}

impl MockLibrarySearch {
    pub fn new(entries: Vec<PremiseEntry>) -> Self {
        MockLibrarySearch { entries }
    }

    /// Loads `[[premises]]` rows (`name`, `statement`, `module`) from TOML.
    pub fn load(path: &Path) -> Result<Self, ToolError> {
        let text = fs::read_to_string(path).map_err(|e| ToolError::Unavailable(format!("{}: {e}", path.display())))?;
        let table: PremiseTable =
            toml::from_str(&text).map_err(|e| ToolError::Invalid(format!("{}: {e}", path.display())))?;
        Ok(Self::new(table.premises))
    }

    /// A dozen core `Nat` lemmas.
    pub fn nat_sample() -> Self {
        const ROWS: &[(&str, &str)] = &[
            ("Nat.add_zero", "∀ (n : ℕ), n + 0 = n"),
            ("Nat.zero_add", "∀ (n : ℕ), 0 + n = n"),
            ("Nat.add_comm", "∀ (n m : ℕ), n + m = m + n"),
            ("Nat.add_assoc", "∀ (n m k : ℕ), n + m + k = n + (m + k)"),
            ("Nat.add_succ", "∀ (n m : ℕ), n + m.succ = (n + m).succ"),
            ("Nat.succ_add", "∀ (n m : ℕ), n.succ + m = (n + m).succ"),
            ("Nat.mul_comm", "∀ (n m : ℕ), n * m = m * n"),
            ("Nat.mul_one", "∀ (n : ℕ), n * 1 = n"),
            ("Nat.mul_zero", "∀ (n : ℕ), n * 0 = 0"),
            ("Nat.le_refl", "∀ (n : ℕ), n ≤ n"),
            ("Nat.lt_irrefl", "∀ (n : ℕ), ¬n < n"),
            ("Nat.succ_ne_zero", "∀ (n : ℕ), n.succ ≠ 0"),
        ];
        Self::new(
            ROWS.iter()
                .map(|(n, s)| PremiseEntry {
                    name: n.to_string(),
                    statement: s.to_string(),
                    module: "Init.Data.Nat.Basic".to_string(),
                })
                .collect(),
        )
    }

    pub fn score(&self, query: &str, entry: &PremiseEntry) -> f64 {
        let q = normalize(query);
        let q_tokens: BTreeSet<&str> = q.split(' ').filter(|t| !t.is_empty()).collect();
        if q_tokens.is_empty() {
            return 0.0;
        }
        let e_tokens = entry_tokens(entry);
        let overlap = q_tokens.iter().filter(|t| e_tokens.contains(**t)).count() as f64 / q_tokens.len() as f64;
        let substring = normalize(&entry.statement).contains(&q) || entry.name.to_lowercase().contains(&q);
        0.5 * f64::from(u8::from(substring)) + 0.5 * overlap
    }
}

impl LibrarySearch for MockLibrarySearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<PremiseHit>, ToolError> {
        check(query, limit)?;
        let hits = self
            .entries
            .iter()
            .filter_map(|e| {
                let score = self.score(query, e);
                (score > 0.0).then(|| PremiseHit {
                    name: e.name.clone(),
                    statement: e.statement.clone(),
                    score,
                    module: e.module.clone(),
                })
            })
            .collect();
        Ok(finish(hits, limit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_hit_for_statement_query() {
        let hits = MockLibrarySearch::nat_sample().search("n + 0 = n", 10).unwrap();
        assert_eq!(hits[0].name, "Nat.add_zero");
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(hits.iter().all(|h| (0.0..=1.0).contains(&h.score)));
    }

    #[test]
    fn limit_and_zero_overlap() {
        let lib = MockLibrarySearch::nat_sample();
        assert_eq!(lib.search("n + 0 = n", 1).unwrap().len(), 1);
        assert!(lib.search("holomorphic sheaf", 10).unwrap().is_empty());
        assert!(matches!(lib.search("x", 0), Err(ToolError::Invalid(_))));
    }

    #[test]
    fn deterministic() {
        let lib = MockLibrarySearch::nat_sample();
        let a = serde_json::to_string(&lib.search("add comm", 5).unwrap()).unwrap();
        let b = serde_json::to_string(&lib.search("add comm", 5).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("index.toml");
        fs::write(&p, "[[premises]]\nname = \"Foo.bar\"\nstatement = \"a = a\"\nmodule = \"Foo\"\n").unwrap();
        let hits = MockLibrarySearch::load(&p).unwrap().search("a = a", 3).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].score, 1.0);
    }

    #[test]
    fn http_unreachable_is_unavailable() {
        let c = HttpLibrarySearch::new("http://127.0.0.1:9/search", Duration::from_millis(300)).unwrap();
        assert!(matches!(c.search("q", 3), Err(ToolError::Unavailable(_))));
    }
}
