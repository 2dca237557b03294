//! Query-relevant passage extraction.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use async_trait::async_trait;
use xmaster_core::llm_gateway::{Gateway, GenParams, GenRequest, Message};
use xmaster_core::registry::Registry;

use crate::types::Passage;

pub const WINDOW_CHARS: usize = 1000;
pub const WINDOW_OVERLAP: usize = 200;
pub const TOP_PASSAGES: usize = 8;

#[async_trait]
pub trait RelevanceExtractor: Send + Sync {
    fn name(&self) -> &str;

    /// Passages sorted by descending score, scores in [0, 1].
    async fn extract(&self, content: &str, query: &str) -> Vec<Passage>;
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Overlapping character windows. The last window ends at the end of the text.
pub fn windows(content: &str) -> Vec<&str> {
    let bounds: Vec<usize> = content.char_indices().map(|(i, _)| i).chain([content.len()]).collect();
    let chars = bounds.len() - 1;
    let stride = WINDOW_CHARS - WINDOW_OVERLAP;
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars {
        let end = (start + WINDOW_CHARS).min(chars);
        out.push(&content[bounds[start]..bounds[end]]);
        if end == chars {
            break;
        }
        start += stride;
    }
    out
}

/// Scores every window: the sum over distinct query terms of
/// `tf * ln(1 + N / df)`, divided by `sqrt(window tokens)`, then scaled so
/// the best window scores 1. Returns the top [`TOP_PASSAGES`], ties in
/// document order.
pub fn lexical_rank(content: &str, query: &str) -> Vec<Passage> {
    let wins = windows(content);
    if wins.is_empty() {
        return Vec::new();
    }
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    let counts: Vec<(HashMap<String, usize>, usize)> = wins
        .iter()
        .map(|w| {
            let toks = tokenize(w);
            let n = toks.len();
            let mut tf = HashMap::new();
            for t in toks.into_iter().filter(|t| terms.contains(t)) {
                *tf.entry(t).or_insert(0) += 1;
            }
            (tf, n)
        })
        .collect();
    let n = wins.len() as f64;
    let idf: HashMap<&str, f64> = terms
        .iter()
        .map(|t| {
            let df = counts.iter().filter(|(tf, _)| tf.contains_key(t)).count();
            let w = if df == 0 { 0.0 } else { (1.0 + n / df as f64).ln() };
            (t.as_str(), w)
        })
        .collect();
    let raw: Vec<f64> = counts
        .iter()
        .map(|(tf, len)| {
            // Sum in term order so scores are reproducible to the last bit.
            let hits: f64 = terms
                .iter()
                .map(|t| tf.get(t).map_or(0.0, |&c| c as f64 * idf[t.as_str()]))
                .sum();
            hits / ((*len).max(1) as f64).sqrt()
        })
        .collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    let mut ranked: Vec<(usize, f64)> = raw
        .iter()
        .map(|&r| if max > 0.0 { r / max } else { 0.0 })
        .enumerate()
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .take(TOP_PASSAGES)
        .map(|(i, score)| Passage {
            text: wins[i].to_string(),
            relevance_score: score,
        })
        .collect()
}

pub struct Lexical;

#[async_trait]
impl RelevanceExtractor for Lexical {
    fn name(&self) -> &str {
        "lexical"
    }

    async fn extract(&self, content: &str, query: &str) -> Vec<Passage> {
        lexical_rank(content, query)
    }
}

const SUMMARY_PROMPT: &str = "Below is the text of a web page. Quote or summarize only the parts relevant to the query. \
Reply with the relevant content and nothing else.\n\nQuery: {query}\n\nPage:\n{content}";

/// One gateway call that condenses the page to query-relevant content.
/// Falls back to [`lexical_rank`] on any provider failure.
pub struct ModelAssisted {
    gateway: Gateway,
    /// Characters of page text sent to the model.
    pub max_input_chars: usize,
}

impl ModelAssisted {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            max_input_chars: 60_000,
        }
    }
}

#[async_trait]
impl RelevanceExtractor for ModelAssisted {
    fn name(&self) -> &str {
        "model"
    }

    async fn extract(&self, content: &str, query: &str) -> Vec<Passage> {
        let clipped: String = content.chars().take(self.max_input_chars).collect();
        let prompt = SUMMARY_PROMPT.replace("{content}", &clipped).replace("{query}", query);
        let req = GenRequest::new(
            vec![Message::user(prompt), Message::assistant("")],
            GenParams {
                temperature: 0.0,
                max_new_tokens: 4096,
                ..GenParams::default()
            },
        );
        match self.gateway.generate(&req).await {
            Ok(out) if !out.text.trim().is_empty() => vec![Passage {
                text: out.text.trim().to_string(),
                relevance_score: 1.0,
            }],
            Ok(_) => lexical_rank(content, query),
            Err(e) => {
                tracing::warn!(error = %e, "model-assisted relevance failed; using lexical");
                lexical_rank(content, query)
            }
        }
    }
}

#[derive(Clone, Default)]
pub struct RelevanceConfig {
    pub gateway: Option<Gateway>,
}

pub type RelevanceRegistry = Registry<dyn RelevanceExtractor, RelevanceConfig>;

/// `lexical` (default) and `model` (needs a gateway).
pub fn default_extractors() -> RelevanceRegistry {
    let mut reg = RelevanceRegistry::new("relevance extractor");
    reg.register("lexical", |_: &RelevanceConfig| Ok(Arc::new(Lexical) as Arc<dyn RelevanceExtractor>));
    reg.register("model", |cfg: &RelevanceConfig| {
        let gw = cfg.gateway.clone().ok_or_else(|| "model extractor needs a gateway".to_string())?;
        Ok(Arc::new(ModelAssisted::new(gw)) as Arc<dyn RelevanceExtractor>)
    });
    reg
}
