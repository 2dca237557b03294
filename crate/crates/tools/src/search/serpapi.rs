use async_trait::async_trait;
use serde_json::Value;

use super::{scalar_string, send_with_retry, str_field, SearchProvider, SearchProviderConfig};
use crate::error::ToolError;
use crate::types::{Attribute, EntityFacts, Preview, SearchResponse};

const ENDPOINT: &str = "https://serpapi.com";

/// Knowledge-graph keys that are not facts about the entity.
const SKIPPED: &[&str] = &["title", "type", "description", "kgmid", "source", "entity_type"];

/// serpapi.com adapter using the Google engine.
pub struct SerpApi {
    http: reqwest::Client,
    config: SearchProviderConfig,
}

impl SerpApi {
    pub fn new(config: SearchProviderConfig) -> Result<Self, ToolError> {
        Ok(Self {
            http: config.client()?,
            config,
        })
    }
}

#[async_trait]
impl SearchProvider for SerpApi {
    fn name(&self) -> &str {
        "serpapi"
    }

    async fn search(&self, query: &str, top_k: usize) -> Result<SearchResponse, ToolError> {
        let key = self.config.api_key()?;
        let base = self.config.base_url.as_deref().unwrap_or(ENDPOINT).trim_end_matches('/');
        let url = format!("{base}/search.json");
        let num = top_k.to_string();
        let raw = send_with_retry(
            || {
                self.http
                    .get(&url)
                    .query(&[("engine", "google"), ("q", query), ("num", num.as_str()), ("api_key", key.as_str())])
            },
            self.config.retries,
        )
        .await?;
        Ok(map_serpapi(&raw))
    }
}

/// `knowledge_graph` → entity facts, `organic_results` → previews,
/// `related_searches` → related queries.
pub fn map_serpapi(raw: &Value) -> SearchResponse {
    let entity_facts = raw.get("knowledge_graph").and_then(|kg| {
        let name = str_field(kg, "title");
        if name.is_empty() {
            return None;
        }
        let mut attributes = Vec::new();
        let kind = str_field(kg, "type");
        if !kind.is_empty() {
            attributes.push(Attribute {
                key: "Type".into(),
                value: kind,
            });
        }
        if let Some(map) = kg.as_object() {
            for (k, v) in map {
                if SKIPPED.contains(&k.as_str()) || k.ends_with("link") || k.contains("image") || k.contains("thumbnail") {
                    continue;
                }
                if let Some(value) = scalar_string(v) {
                    attributes.push(Attribute {
                        key: k.replace('_', " "),
                        value,
                    });
                }
            }
        }
        Some(EntityFacts {
            name,
            description: str_field(kg, "description"),
            attributes,
        })
    });
    let previews = raw
        .get("organic_results")
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .map(|it| Preview {
                    title: str_field(it, "title"),
                    url: str_field(it, "link"),
                    snippet: str_field(it, "snippet"),
                })
                .collect()
        })
        .unwrap_or_default();
    let related_queries = raw
        .get("related_searches")
        .and_then(Value::as_array)
        .map(|items| items.iter().map(|it| str_field(it, "query")).collect())
        .unwrap_or_default();
    SearchResponse {
        entity_facts,
        previews,
        related_queries,
    }
}
