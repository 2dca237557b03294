use serde::{Deserialize, Serialize};

pub const DEFAULT_TOP_K: usize = 10;
pub const MAX_TOP_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub key: String,
    pub value: String,
}

/// Knowledge-panel style facts about the main entity of a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityFacts {
    pub name: String,
    pub description: String,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preview {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub entity_facts: Option<EntityFacts>,
    pub previews: Vec<Preview>,
    pub related_queries: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    #[default]
    Auto,
    General,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseRequest {
    pub url: String,
    #[serde(default)]
    pub query: String,
    #[serde(default)]
    pub mode: ParseMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    GeneralPage,
    PaperHtml,
    PaperPdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub text: String,
    pub relevance_score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subpage {
    pub url: String,
    pub brief_description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub method: String,
    pub outcome: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub attempts: Vec<Attempt>,
}

impl Diagnostics {
    pub fn record(&mut self, method: &str, outcome: impl Into<String>) {
        self.attempts.push(Attempt {
            method: method.to_string(),
            outcome: outcome.into(),
        });
    }

    pub fn methods(&self) -> Vec<&str> {
        self.attempts.iter().map(|a| a.method.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResponse {
    pub source_url: String,
    pub strategy: Strategy,
    pub relevant_passages: Vec<Passage>,
    pub subpages: Vec<Subpage>,
    pub fetch_diagnostics: Diagnostics,
}
