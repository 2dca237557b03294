//! Recorded request/response pairs for offline replay.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::ToolError;
use crate::normalize::normalize_url;
use crate::types::{ParseRequest, SearchRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Search,
    Parse,
}

impl Endpoint {
    pub fn as_str(self) -> &'static str {
        match self {
            Endpoint::Search => "search",
            Endpoint::Parse => "parse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToolRequest {
    Search(SearchRequest),
    Parse(ParseRequest),
}

impl ToolRequest {
    pub fn endpoint(&self) -> Endpoint {
        match self {
            ToolRequest::Search(_) => Endpoint::Search,
            ToolRequest::Parse(_) => Endpoint::Parse,
        }
    }

    /// The request with whitespace collapsed and the URL normalized, tagged
    /// with its endpoint. Equal canonical forms share cassettes and cache
    /// entries.
    pub fn canonical(&self) -> Value {
        let squash = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
        match self {
            ToolRequest::Search(r) => json!({
                "endpoint": "search",
                "query": squash(&r.query),
                "top_k": r.top_k,
            }),
            ToolRequest::Parse(r) => json!({
                "endpoint": "parse",
                "url": normalize_url(&r.url).unwrap_or_else(|| r.url.trim().to_string()),
                "query": squash(&r.query),
                "mode": r.mode,
            }),
        }
    }

    /// Hex sha256 of the canonical form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.canonical()).expect("json value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Status and JSON body of one service response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub status: u16,
    pub body: Value,
}

impl Reply {
    pub fn ok(body: Value) -> Self {
        Self { status: 200, body }
    }

    pub fn error(e: &ToolError) -> Self {
        Self {
            status: e.status(),
            body: e.to_json(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.body).expect("json value serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub request_hash: String,
    pub request: Value,
    pub response: Reply,
    /// Unix seconds.
    pub recorded_at: u64,
}

impl Cassette {
    pub fn new(request: &ToolRequest, response: Reply) -> Self {
        Self {
            request_hash: request.hash(),
            request: request.canonical(),
            response,
            recorded_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    /// `<endpoint>-<hash prefix>.json`
    pub fn file_name(&self) -> String {
        let endpoint = self.request.get("endpoint").and_then(Value::as_str).unwrap_or("request");
        format!("{endpoint}-{}.json", &self.request_hash[..16])
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name());
        let mut bytes = serde_json::to_vec_pretty(self).expect("cassette serializes");
        bytes.push(b'\n');
        std::fs::write(&path, bytes)?;
        Ok(path)
    }
}

/// Every `*.json` cassette in a directory, keyed by request hash.
#[derive(Debug, Clone, Default)]
pub struct CassetteStore {
    entries: HashMap<String, Cassette>,
}

impl CassetteStore {
    pub fn load(dir: &Path) -> Result<Self, ToolError> {
        let read = std::fs::read_dir(dir).map_err(|e| ToolError::BadConfig(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = read
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut entries = HashMap::new();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| ToolError::BadConfig(format!("{}: {e}", p.display())))?;
            let c: Cassette =
                serde_json::from_str(&text).map_err(|e| ToolError::BadConfig(format!("{}: {e}", p.display())))?;
            entries.insert(c.request_hash.clone(), c);
        }
        Ok(Self { entries })
    }

    pub fn get(&self, hash: &str) -> Option<&Cassette> {
        self.entries.get(hash)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ParseMode;

    fn search(q: &str, k: usize) -> ToolRequest {
        ToolRequest::Search(SearchRequest {
            query: q.into(),
            top_k: k,
        })
    }

    #[test]
    fn hash_ignores_cosmetic_differences() {
        assert_eq!(search("rust  lang ", 5).hash(), search("rust lang", 5).hash());
        assert_ne!(search("rust lang", 5).hash(), search("rust lang", 6).hash());
        let p = |url: &str| {
            ToolRequest::Parse(ParseRequest {
                url: url.into(),
                query: "q".into(),
                mode: ParseMode::Auto,
            })
        };
        assert_eq!(p("https://a.com/x?utm_source=z").hash(), p("https://a.com/x").hash());
        assert_ne!(p("https://a.com/x").hash(), search("https://a.com/x", 5).hash());
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let req = search("q", 3);
        let c = Cassette::new(&req, Reply::ok(json!({"previews": [], "score": 0.1 + 0.2})));
        let path = c.write(dir.path()).unwrap();
        assert!(path.file_name().unwrap().to_str().unwrap().starts_with("search-"));
        let store = CassetteStore::load(dir.path()).unwrap();
        let back = store.get(&req.hash()).unwrap();
        assert_eq!(back, &c);
        assert_eq!(back.response.to_bytes(), c.response.to_bytes());
    }
}
