//! Search provider adapters. Each maps a SERP API's knowledge-graph, organic
//! and related-search channels onto [`SearchResponse`].

mod serpapi;
mod serper;

pub use serpapi::{map_serpapi, SerpApi};
pub use serper::{map_serper, Serper};

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde_json::Value;
use xmaster_core::registry::Registry;

use crate::error::ToolError;
use crate::normalize::normalize_url;
use crate::types::{Preview, SearchResponse};

#[async_trait]
pub trait SearchProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Raw provider call; the service validates and post-processes.
    async fn search(&self, query: &str, top_k: usize) -> Result<SearchResponse, ToolError>;
}

#[derive(Debug, Clone)]
pub struct SearchProviderConfig {
    /// Overrides the provider's public endpoint.
    pub base_url: Option<String>,
    /// Takes precedence over `api_key_env`.
    pub api_key: Option<String>,
    pub api_key_env: String,
    pub timeout: Duration,
    pub retries: u32,
    /// Host → address overrides, mainly for local fixtures.
    pub resolve: Vec<(String, SocketAddr)>,
}

impl Default for SearchProviderConfig {
    fn default() -> Self {
        Self {
            base_url: None,
            api_key: None,
            api_key_env: "SEARCH_API_KEY".into(),
            timeout: Duration::from_secs(30),
            retries: 3,
            resolve: Vec::new(),
        }
    }
}

impl SearchProviderConfig {
    pub(crate) fn client(&self) -> Result<reqwest::Client, ToolError> {
        let mut builder = reqwest::Client::builder().timeout(self.timeout);
        for (host, addr) in &self.resolve {
            builder = builder.resolve(host, *addr);
        }
        builder.build().map_err(|e| ToolError::BadConfig(e.to_string()))
    }

    pub(crate) fn api_key(&self) -> Result<String, ToolError> {
        if let Some(key) = &self.api_key {
            return Ok(key.clone());
        }
        std::env::var(&self.api_key_env)
            .map_err(|_| ToolError::BadConfig(format!("{} is not set", self.api_key_env)))
    }
}

pub type SearchRegistry = Registry<dyn SearchProvider, SearchProviderConfig>;

pub fn default_search_providers() -> SearchRegistry {
    let mut reg = SearchRegistry::new("search provider");
    reg.register("serper", |cfg: &SearchProviderConfig| {
        Ok(Arc::new(Serper::new(cfg.clone()).map_err(|e| e.to_string())?) as Arc<dyn SearchProvider>)
    });
    reg.register("serpapi", |cfg: &SearchProviderConfig| {
        Ok(Arc::new(SerpApi::new(cfg.clone()).map_err(|e| e.to_string())?) as Arc<dyn SearchProvider>)
    });
    reg
}

/// Drops previews without a usable URL, normalizes the rest, removes
/// duplicates and truncates to `top_k`.
pub fn postprocess(mut resp: SearchResponse, top_k: usize) -> SearchResponse {
    let mut seen = std::collections::HashSet::new();
    resp.previews = resp
        .previews
        .into_iter()
        .filter_map(|p| {
            let url = normalize_url(&p.url)?;
            seen.insert(url.clone()).then_some(Preview { url, ..p })
        })
        .take(top_k)
        .collect();
    resp.related_queries.retain(|q| !q.trim().is_empty());
    resp
}

/// Sends one provider request with retries on transport errors and 5xx.
pub(crate) async fn send_with_retry(
    build: impl Fn() -> reqwest::RequestBuilder,
    retries: u32,
) -> Result<Value, ToolError> {
    let mut last = String::new();
    for attempt in 0..retries.max(1) {
        if attempt > 0 {
            tokio::time::sleep(Duration::from_millis(250 * 2u64.pow(attempt - 1))).await;
        }
        match build().send().await {
            Ok(resp) => {
                let status = resp.status();
                if status.as_u16() == 429 {
                    return Err(ToolError::ProviderQuota { retry_advised: true });
                }
                if status.as_u16() == 401 || status.as_u16() == 403 {
                    return Err(ToolError::BadConfig(format!("provider rejected credentials ({status})")));
                }
                if status.is_server_error() {
                    last = format!("status {status}");
                    continue;
                }
                if !status.is_success() {
                    return Err(ToolError::ProviderDown(format!("status {status}")));
                }
                return resp
                    .json::<Value>()
                    .await
                    .map_err(|e| ToolError::ProviderDown(format!("bad provider body: {e}")));
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(ToolError::ProviderDown(last))
}

pub(crate) fn str_field(v: &Value, key: &str) -> String {
    v.get(key).and_then(Value::as_str).unwrap_or_default().trim().to_string()
}

pub(crate) fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}
