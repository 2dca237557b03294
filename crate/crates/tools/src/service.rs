use std::path::PathBuf;
use std::sync::Arc;

use dashmap::DashMap;
use serde_json::Value;
use xmaster_core::llm_gateway::Gateway;

use crate::cassette::{Cassette, CassetteStore, Endpoint, Reply, ToolRequest};
use crate::error::ToolError;
use crate::parse::{default_content_extractors, parse, ContentExtractor, FetchConfig, Fetcher, ParseContext};
use crate::relevance::{default_extractors, RelevanceConfig, RelevanceExtractor};
use crate::search::{default_search_providers, postprocess, SearchProvider, SearchProviderConfig};
use crate::types::{ParseRequest, ParseResponse, SearchRequest, SearchResponse, MAX_TOP_K};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Mode {
    /// Real network calls.
    #[default]
    Live,
    /// Real network calls, each response also written as a cassette.
    Record(PathBuf),
    /// Cassettes only; unknown requests fail with `FixtureMiss`.
    Replay(PathBuf),
}

#[derive(Clone)]
pub struct ToolConfig {
    pub mode: Mode,
    pub search_provider: String,
    pub search: SearchProviderConfig,
    pub relevance: String,
    /// Needed by the `model` relevance extractor.
    pub gateway: Option<Gateway>,
    /// Content extractors, tried in order.
    pub extractors: Vec<String>,
    pub fetch: FetchConfig,
    pub ar5iv_base: String,
    pub arxiv_base: String,
    /// Persists successful live responses across restarts.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Live,
            search_provider: "serper".into(),
            search: SearchProviderConfig::default(),
            relevance: "lexical".into(),
            gateway: None,
            extractors: vec!["main-content".into(), "densest-block".into()],
            fetch: FetchConfig::default(),
            ar5iv_base: "https://ar5iv.labs.arxiv.org".into(),
            arxiv_base: "https://arxiv.org".into(),
            cache_dir: None,
        }
    }
}

/// Web search and web parse behind one request → reply function shared by
/// the HTTP server and in-process callers.
pub struct ToolService {
    mode: Mode,
    search: Arc<dyn SearchProvider>,
    fetcher: Fetcher,
    extractors: Vec<Arc<dyn ContentExtractor>>,
    relevance: Arc<dyn RelevanceExtractor>,
    ar5iv_base: String,
    arxiv_base: String,
    cassettes: CassetteStore,
    cache: DashMap<String, Value>,
    cache_dir: Option<PathBuf>,
}

impl ToolService {
    pub fn new(config: ToolConfig) -> Result<Self, ToolError> {
        let bad = |e: xmaster_core::registry::RegistryError| ToolError::BadConfig(e.to_string());
        let search = default_search_providers()
            .build(&config.search_provider, &config.search)
            .map_err(bad)?;
        let relevance = default_extractors()
            .build(
                &config.relevance,
                &RelevanceConfig {
                    gateway: config.gateway.clone(),
                },
            )
            .map_err(bad)?;
        let registry = default_content_extractors();
        let extractors = config
            .extractors
            .iter()
            .map(|n| registry.build(n, &()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let cassettes = match &config.mode {
            Mode::Replay(dir) => CassetteStore::load(dir)?,
            _ => CassetteStore::default(),
        };
        if let Some(dir) = &config.cache_dir {
            std::fs::create_dir_all(dir).map_err(|e| ToolError::BadConfig(format!("{}: {e}", dir.display())))?;
        }
        Ok(Self {
            mode: config.mode,
            search,
            fetcher: Fetcher::new(config.fetch)?,
            extractors,
            relevance,
            ar5iv_base: config.ar5iv_base,
            arxiv_base: config.arxiv_base,
            cassettes,
            cache: DashMap::new(),
            cache_dir: config.cache_dir,
        })
    }

    /// Replaces the search provider built from the config.
    pub fn with_search_provider(mut self, provider: Arc<dyn SearchProvider>) -> Self {
        self.search = provider;
        self
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn cassette_count(&self) -> usize {
        self.cassettes.len()
    }

    /// Handles a raw JSON request body.
    pub async fn call(&self, endpoint: Endpoint, body: &[u8]) -> Reply {
        match decode(endpoint, body) {
            Ok(req) => self.respond(&req).await,
            Err(e) => Reply::error(&e),
        }
    }

    pub async fn respond(&self, req: &ToolRequest) -> Reply {
        if let Err(e) = validate(req) {
            return Reply::error(&e);
        }
        let hash = req.hash();
        if let Mode::Replay(_) = self.mode {
            return match self.cassettes.get(&hash) {
                Some(c) => c.response.clone(),
                None => Reply::error(&ToolError::FixtureMiss(hash)),
            };
        }
        if let Some(body) = self.cached(&hash) {
            return Reply::ok(body);
        }
        let reply = match self.execute(req).await {
            Ok(body) => {
                self.store(&hash, &body);
                Reply::ok(body)
            }
            Err(e) => Reply::error(&e),
        };
        if let Mode::Record(dir) = &self.mode {
            if recordable(&reply) {
                if let Err(e) = Cassette::new(req, reply.clone()).write(dir) {
                    tracing::warn!(error = %e, "could not write cassette");
                }
            }
        }
        reply
    }

    pub async fn search(&self, req: SearchRequest) -> Result<SearchResponse, ToolError> {
        typed(self.respond(&ToolRequest::Search(req)).await)
    }

    pub async fn parse(&self, req: ParseRequest) -> Result<ParseResponse, ToolError> {
        typed(self.respond(&ToolRequest::Parse(req)).await)
    }

    async fn execute(&self, req: &ToolRequest) -> Result<Value, ToolError> {
        // Both paths go through `Value` so live and replayed bodies serialize
        // identically.
        match req {
            ToolRequest::Search(r) => {
                let raw = self.search.search(r.query.trim(), r.top_k).await?;
                Ok(serde_json::to_value(postprocess(raw, r.top_k)).expect("response serializes"))
            }
            ToolRequest::Parse(r) => {
                let ctx = ParseContext {
                    fetcher: &self.fetcher,
                    extractors: &self.extractors,
                    relevance: self.relevance.as_ref(),
                    ar5iv_base: &self.ar5iv_base,
                    arxiv_base: &self.arxiv_base,
                };
                let resp = parse(&ctx, &r.url, &r.query, r.mode).await?;
                Ok(serde_json::to_value(resp).expect("response serializes"))
            }
        }
    }

    fn cached(&self, hash: &str) -> Option<Value> {
        if let Some(v) = self.cache.get(hash) {
            return Some(v.clone());
        }
        let path = self.cache_dir.as_ref()?.join(format!("{hash}.json"));
        let v: Value = serde_json::from_slice(&std::fs::read(path).ok()?).ok()?;
        self.cache.insert(hash.to_string(), v.clone());
        Some(v)
    }

    fn store(&self, hash: &str, body: &Value) {
        self.cache.insert(hash.to_string(), body.clone());
        if let Some(dir) = &self.cache_dir {
            let bytes = serde_json::to_vec(body).expect("json value serializes");
            if let Err(e) = std::fs::write(dir.join(format!("{hash}.json")), bytes) {
                tracing::warn!(error = %e, "could not write cache entry");
            }
        }
    }
}

fn decode(endpoint: Endpoint, body: &[u8]) -> Result<ToolRequest, ToolError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ToolError::InvalidRequest("empty request body".into()));
    }
    let invalid = |e: serde_json::Error| ToolError::InvalidRequest(e.to_string());
    Ok(match endpoint {
        Endpoint::Search => ToolRequest::Search(serde_json::from_slice(body).map_err(invalid)?),
        Endpoint::Parse => ToolRequest::Parse(serde_json::from_slice(body).map_err(invalid)?),
    })
}

fn validate(req: &ToolRequest) -> Result<(), ToolError> {
    match req {
        ToolRequest::Search(r) => {
            if r.query.trim().is_empty() {
                return Err(ToolError::EmptyQuery);
            }
            if r.top_k == 0 || r.top_k > MAX_TOP_K {
                return Err(ToolError::InvalidRequest(format!("top_k must be in 1..={MAX_TOP_K}")));
            }
        }
        ToolRequest::Parse(r) => {
            if crate::normalize::normalize_url(&r.url).is_none() {
                return Err(ToolError::InvalidRequest(format!("not an http(s) URL: {:?}", r.url)));
            }
        }
    }
    Ok(())
}

/// Quota, outage and config errors say nothing about the request itself.
fn recordable(reply: &Reply) -> bool {
    let code = reply.body.pointer("/error/code").and_then(Value::as_str);
    !matches!(code, Some("provider_quota" | "provider_down" | "bad_config"))
}

fn typed<T: serde::de::DeserializeOwned>(reply: Reply) -> Result<T, ToolError> {
    if reply.status == 200 {
        serde_json::from_value(reply.body).map_err(|e| ToolError::InvalidRequest(format!("malformed response: {e}")))
    } else {
        Err(ToolError::from_json(&reply.body))
    }
}
