use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ToolError, WebHit};

pub trait WebSearch: Send + Sync {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<WebHit>, ToolError>;
}

fn well_formed(url: &str) -> bool {
    reqwest::Url::parse(url).is_ok_and(|u| matches!(u.scheme(), "http" | "https"))
}

/// Tavily search API client. The key comes from an environment variable.
#[derive(Debug, Clone)]
pub struct TavilySearch {
    api_key: String,
    base_url: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct TavilyResponse {
    #[serde(default)]
    results: Vec<TavilyResult>,
}

#[derive(Deserialize)]
struct TavilyResult {
    #[serde(default)]
    title: String,
    #[serde(default)]
    url: String,
    #[serde(default)]
    content: String,
}

impl TavilySearch {
    pub const DEFAULT_BASE_URL: &'static str = "https://api.tavily.com";

    pub fn from_env(key_var: &str, base_url: Option<&str>, timeout: Duration) -> Result<Self, ToolError> {
        let api_key = std::env::var(key_var)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ToolError::Unavailable(format!("environment variable {key_var} is not set")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ToolError::Unavailable(e.to_string()))?;
        Ok(TavilySearch {
            api_key,
            base_url: base_url.unwrap_or(Self::DEFAULT_BASE_URL).trim_end_matches('/').to_string(),
            client,
        })
    }
}

impl WebSearch for TavilySearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<WebHit>, ToolError> {
        if query.trim().is_empty() {
            return Err(ToolError::Invalid("empty query".into()));
        }
        let resp = self
            .client
            .post(format!("{}/search", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&serde_json::json!({ "query": query, "max_results": limit }))
            .send()
            .map_err(|e| ToolError::Unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ToolError::Unavailable(format!("HTTP {}", resp.status())));
        }
        let body: TavilyResponse = resp
            .json()
            .map_err(|e| ToolError::Unavailable(format!("bad response: {e}")))?;
        Ok(body
            .results
            .into_iter()
            .filter(|r| well_formed(&r.url))
            .map(|r| WebHit {
                title: r.title,
                url: r.url,
                snippet: r.content,
            })
            .take(limit)
            .collect())
    }
}

/// Script for [`MockWebSearch`]: canned hits per exact query and injected
/// failures. Unknown queries return no hits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WebScript {
    pub hits: BTreeMap<String, Vec<WebHit>>,
    pub failures: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
pub struct MockWebSearch {
    script: WebScript,
}

impl MockWebSearch {
    pub fn new(script: WebScript) -> Self {
        MockWebSearch { script }
    }

    pub fn load(path: &Path) -> Result<Self, ToolError> {
        let text = fs::read_to_string(path).map_err(|e| ToolError::Unavailable(format!("{}: {e}", path.display())))?;
        let script = serde_json::from_str(&text).map_err(|e| ToolError::Invalid(format!("{}: {e}", path.display())))?;
        Ok(Self::new(script))
    }
}

impl WebSearch for MockWebSearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<WebHit>, ToolError> {
        if query.trim().is_empty() {
            return Err(ToolError::Invalid("empty query".into()));
        }
        if let Some(msg) = self.script.failures.get(query) {
            return Err(ToolError::Unavailable(msg.clone()));
        }
        Ok(self
            .script
            .hits
            .get(query)
            .map(|h| h.iter().filter(|w| well_formed(&w.url)).take(limit).cloned().collect())
            .unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(n: u32) -> WebHit {
        WebHit {
            title: format!("hit {n}"),
            url: format!("https://example.org/{n}"),
            snippet: "s".into(),
        }
    }

    #[test]
    fn scripted_hits_and_empty() {
        let mut s = WebScript::default();
        s.hits.insert("q".into(), vec![hit(1), hit(2)]);
        s.hits.insert("bad".into(), vec![WebHit { url: "not a url".into(), ..hit(3) }]);
        let w = MockWebSearch::new(s);
        assert_eq!(w.search("q", 10).unwrap(), vec![hit(1), hit(2)]);
        assert_eq!(w.search("q", 1).unwrap().len(), 1);
        assert!(w.search("other", 10).unwrap().is_empty());
        assert!(w.search("bad", 10).unwrap().is_empty());
    }

    #[test]
    fn fault_injection() {
        let mut s = WebScript::default();
        s.failures.insert("q".into(), "timeout".into());
        assert_eq!(
            MockWebSearch::new(s).search("q", 5),
            Err(ToolError::Unavailable("timeout".into()))
        );
    }

    #[test]
    fn tavily_needs_key() {
        let r = TavilySearch::from_env("LEANLOOP_TEST_SURELY_UNSET_KEY", None, Duration::from_secs(1));
        assert!(matches!(r, Err(ToolError::Unavailable(_))));
    }
}
