use async_trait::async_trait;
use serde_json::{json, Value};

use super::{scalar_string, send_with_retry, str_field, SearchProvider, SearchProviderConfig};
use crate::error::ToolError;
use crate::types::{Attribute, EntityFacts, Preview, SearchResponse};

const ENDPOINT: &str = "https://google.serper.dev";

/// serper.dev adapter. POSTs `{q, num}` to `/search` with an `X-API-KEY` header.
pub struct Serper {
    http: reqwest::Client,
    config: SearchProviderConfig,
}

impl Serper {
    pub fn new(config: SearchProviderConfig) -> Result<Self, ToolError> {
        Ok(Self {
            http: config.client()?,
            config,
        })
    }
}

#[async_trait]
impl SearchProvider for Serper {
    fn name(&self) -> &str {
        "serper"
    }

    async fn search(&self, query: &str, top_k: usize) -> Result<SearchResponse, ToolError> {
        let key = self.config.api_key()?;
        let base = self.config.base_url.as_deref().unwrap_or(ENDPOINT).trim_end_matches('/');
        let url = format!("{base}/search");
        let body = json!({ "q": query, "num": top_k });
        let raw = send_with_retry(
            || self.http.post(&url).header("X-API-KEY", &key).json(&body),
            self.config.retries,
        )
        .await?;
        Ok(map_serper(&raw))
    }
}

/// `knowledgeGraph` → entity facts, `organic` → previews, `relatedSearches`
/// → related queries.
pub fn map_serper(raw: &Value) -> SearchResponse {
    let entity_facts = raw.get("knowledgeGraph").and_then(|kg| {
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
        if let Some(map) = kg.get("attributes").and_then(Value::as_object) {
            for (k, v) in map {
                if let Some(value) = scalar_string(v) {
                    attributes.push(Attribute { key: k.clone(), value });
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
        .get("organic")
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
        .get("relatedSearches")
        .and_then(Value::as_array)
        .map(|items| items.iter().map(|it| str_field(it, "query")).collect())
        .unwrap_or_default();
    SearchResponse {
        entity_facts,
        previews,
        related_queries,
    }
}
