//! Test doubles: a strictly ordered script, a closure-backed model for
//! order-independent behaviour under concurrency, and a seeded sampler.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use futures::StreamExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{ChunkStream, CompletionProvider, GatewayError, GenRequest, ProviderChunk};

type PredicateFn = dyn Fn(&GenRequest) -> Result<(), String> + Send + Sync;

/// A check on the context a scripted step receives. On failure it returns a
/// human-readable diff.
#[derive(Clone)]
pub struct ContextPredicate(Arc<PredicateFn>);

impl std::fmt::Debug for ContextPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ContextPredicate(..)")
    }
}

impl ContextPredicate {
    pub fn new(f: impl Fn(&GenRequest) -> Result<(), String> + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn contains(needle: impl Into<String>) -> Self {
        let needle = needle.into();
        Self::new(move |req| {
            let ctx = req.context_text();
            if ctx.contains(&needle) {
                Ok(())
            } else {
                Err(format!(
                    "expected context to contain {needle:?}\n--- context tail ---\n{}",
                    tail(&ctx, 400)
                ))
            }
        })
    }

    pub fn prefill_ends_with(suffix: impl Into<String>) -> Self {
        let suffix = suffix.into();
        Self::new(move |req| {
            let prefill = req.prefill();
            if prefill.ends_with(&suffix) {
                Ok(())
            } else {
                Err(format!(
                    "expected prefill to end with {suffix:?}\n--- prefill tail ---\n{}",
                    tail(prefill, 400)
                ))
            }
        })
    }

    pub fn check(&self, req: &GenRequest) -> Result<(), String> {
        (self.0)(req)
    }
}

fn tail(s: &str, n: usize) -> &str {
    let mut start = s.len().saturating_sub(n);
    while !s.is_char_boundary(start) {
        start += 1;
    }
    &s[start..]
}

#[derive(Debug, Clone)]
pub struct ScriptStep {
    pub predicate: Option<ContextPredicate>,
    /// Each entry is streamed as one chunk and counts as one token.
    pub tokens: Vec<String>,
}

impl ScriptStep {
    /// Replays `output` as a single chunk; use [`ScriptStep::chunk_chars`] to
    /// split it.
    pub fn text(output: impl Into<String>) -> Self {
        Self {
            predicate: None,
            tokens: vec![output.into()],
        }
    }

    pub fn tokens(tokens: Vec<String>) -> Self {
        Self {
            predicate: None,
            tokens,
        }
    }

    /// Re-splits the output into chunks of at most `n` characters.
    pub fn chunk_chars(mut self, n: usize) -> Self {
        self.tokens = split_chars(&self.tokens.concat(), n);
        self
    }

    pub fn expect(mut self, predicate: ContextPredicate) -> Self {
        self.predicate = Some(predicate);
        self
    }

    pub fn expect_contains(self, needle: impl Into<String>) -> Self {
        self.expect(ContextPredicate::contains(needle))
    }
}

pub(crate) fn split_chars(text: &str, n: usize) -> Vec<String> {
    let n = n.max(1);
    let chars: Vec<char> = text.chars().collect();
    chars.chunks(n).map(|c| c.iter().collect()).collect()
}

fn replay(tokens: Vec<String>) -> ChunkStream {
    futures::stream::iter(
        tokens
            .into_iter()
            .filter(|t| !t.is_empty())
            .map(|text| Ok(ProviderChunk::Text { text, tokens: 1 })),
    )
    .boxed()
}

/// The nth call checks step n's predicate and replays its output.
#[derive(Debug)]
pub struct ScriptedModel {
    steps: Vec<ScriptStep>,
    next: AtomicUsize,
}

#[derive(Deserialize)]
struct JsonStep {
    #[serde(default)]
    contains: Option<String>,
    output: String,
    #[serde(default)]
    chunk_chars: Option<usize>,
}

impl ScriptedModel {
    pub fn new(steps: Vec<ScriptStep>) -> Self {
        assert!(!steps.is_empty(), "a script needs at least one step");
        Self {
            steps,
            next: AtomicUsize::new(0),
        }
    }

    /// `[{"contains": "...", "output": "...", "chunk_chars": 8}, ...]`
    pub fn from_json(raw: &str) -> Result<Self, serde_json::Error> {
        let steps: Vec<JsonStep> = serde_json::from_str(raw)?;
        if steps.is_empty() {
            return Err(serde::de::Error::custom("script has no steps"));
        }
        Ok(Self::new(
            steps
                .into_iter()
                .map(|s| {
                    let mut step = ScriptStep::text(s.output);
                    if let Some(n) = s.chunk_chars {
                        step = step.chunk_chars(n);
                    }
                    if let Some(c) = s.contains {
                        step = step.expect_contains(c);
                    }
                    step
                })
                .collect(),
        ))
    }

    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        self.steps.len().saturating_sub(self.calls())
    }
}

#[async_trait]
impl CompletionProvider for ScriptedModel {
    fn name(&self) -> &str {
        "scripted"
    }

    async fn open_stream(&self, request: &GenRequest) -> Result<ChunkStream, GatewayError> {
        let idx = self.next.fetch_add(1, Ordering::SeqCst);
        let step = self
            .steps
            .get(idx)
            .ok_or(GatewayError::ScriptExhausted { calls: idx })?;
        if let Some(p) = &step.predicate {
            p.check(request)
                .map_err(|diff| GatewayError::PredicateFailed { step: idx, diff })?;
        }
        Ok(replay(step.tokens.clone()))
    }
}

type Responder = dyn Fn(&GenRequest, usize) -> Result<String, GatewayError> + Send + Sync;

/// A model whose output is computed from the request by a closure. The
/// second argument is the global call index.
pub struct FnModel {
    responder: Arc<Responder>,
    chunk_chars: usize,
    calls: AtomicUsize,
}

impl FnModel {
    pub fn new(
        f: impl Fn(&GenRequest, usize) -> Result<String, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            responder: Arc::new(f),
            chunk_chars: 7,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn chunk_chars(mut self, n: usize) -> Self {
        self.chunk_chars = n.max(1);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl CompletionProvider for FnModel {
    fn name(&self) -> &str {
        "fn"
    }

    async fn open_stream(&self, request: &GenRequest) -> Result<ChunkStream, GatewayError> {
        let idx = self.calls.fetch_add(1, Ordering::SeqCst);
        let text = (self.responder)(request, idx)?;
        Ok(replay(split_chars(&text, self.chunk_chars)))
    }
}

/// Picks one of several candidate continuations. Temperature 0 always picks
/// the first; otherwise the choice is drawn from an RNG seeded by the
/// request seed and the context, so a fixed seed is reproducible.
#[derive(Debug, Clone)]
pub struct SampledModel {
    candidates: Vec<String>,
    chunk_chars: usize,
}

impl SampledModel {
    pub fn new(candidates: Vec<String>) -> Self {
        assert!(!candidates.is_empty());
        Self {
            candidates,
            chunk_chars: 5,
        }
    }

    fn pick(&self, request: &GenRequest) -> usize {
        if request.params.temperature == 0.0 {
            return 0;
        }
        let mut rng = match request.params.seed {
            Some(seed) => {
                let mut h = DefaultHasher::new();
                request.context_text().hash(&mut h);
                ChaCha8Rng::seed_from_u64(seed ^ h.finish())
            }
            None => ChaCha8Rng::from_os_rng(),
        };
        rng.random_range(0..self.candidates.len())
    }
}

#[async_trait]
impl CompletionProvider for SampledModel {
    fn name(&self) -> &str {
        "sampled"
    }

    async fn open_stream(&self, request: &GenRequest) -> Result<ChunkStream, GatewayError> {
        let text = &self.candidates[self.pick(request)];
        Ok(replay(split_chars(text, self.chunk_chars)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_gateway::{Gateway, GenParams, Message, RetryPolicy};

    fn gw(p: impl CompletionProvider + 'static) -> Gateway {
        Gateway::new(Arc::new(p)).with_retry(RetryPolicy::none())
    }

    fn req(prefill: &str) -> GenRequest {
        GenRequest::new(
            vec![Message::user("q"), Message::assistant(prefill)],
            GenParams::default(),
        )
    }

    #[tokio::test]
    async fn one_step_replays_exactly() {
        let g = gw(ScriptedModel::new(vec![ScriptStep::text("hello world").chunk_chars(3)]));
        let mut chunks = Vec::new();
        let out = g
            .generate_stream(&req("<think>"), &mut |c| chunks.push(c.to_string()))
            .await
            .unwrap();
        assert_eq!(out.text, "hello world");
        assert_eq!(chunks, vec!["hel", "lo ", "wor", "ld"]);
        assert_eq!(out.tokens_generated, 4);
    }

    #[tokio::test]
    async fn exhausted_script() {
        let g = gw(ScriptedModel::new(vec![ScriptStep::text("a")]));
        g.generate(&req("")).await.unwrap();
        assert_eq!(
            g.generate(&req("")).await,
            Err(GatewayError::ScriptExhausted { calls: 1 })
        );
    }

    #[tokio::test]
    async fn predicate_failure_carries_diff() {
        let g = gw(ScriptedModel::new(vec![
            ScriptStep::text("a").expect_contains("<execution_results>")
        ]));
        match g.generate(&req("<think>no results yet")).await {
            Err(GatewayError::PredicateFailed { step: 0, diff }) => {
                assert!(diff.contains("<execution_results>"));
                assert!(diff.contains("no results yet"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn script_from_json() {
        let m = ScriptedModel::from_json(r#"[{"output": "abcdef", "chunk_chars": 2}, {"contains": "x", "output": "y"}]"#)
            .unwrap();
        assert_eq!(m.steps[0].tokens, vec!["ab", "cd", "ef"]);
        assert!(m.steps[1].predicate.is_some());
        assert!(ScriptedModel::from_json("[]").is_err());
    }

    #[tokio::test]
    async fn seeded_sampling_is_deterministic() {
        let cands: Vec<String> = (0..16).map(|i| format!("<think>candidate {i}</think>{i}")).collect();
        let g = gw(SampledModel::new(cands.clone()));

        let mut r = req("<think>");
        r.params.temperature = 0.0;
        r.params.seed = Some(7);
        let a = g.generate(&r).await.unwrap();
        let b = g.generate(&r).await.unwrap();
        assert_eq!(a.text, b.text);
        assert_eq!(a.text, cands[0]);

        r.params.temperature = 0.6;
        let outs: Vec<String> = futures::future::join_all((0..3).map(|_| g.generate(&r)))
            .await
            .into_iter()
            .map(|o| o.unwrap().text)
            .collect();
        assert!(outs.windows(2).all(|w| w[0] == w[1]));
    }

    #[tokio::test]
    async fn fn_model_sees_call_index() {
        let g = gw(FnModel::new(|r, i| Ok(format!("{}#{i}", r.prefill()))));
        assert_eq!(g.generate(&req("p")).await.unwrap().text, "p#0");
        assert_eq!(g.generate(&req("p")).await.unwrap().text, "p#1");
    }
}
