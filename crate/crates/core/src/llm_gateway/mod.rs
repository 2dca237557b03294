//! Provider-agnostic streaming completion with assistant prefill.
//!
//! A [`Gateway`] wraps a [`CompletionProvider`] and owns everything that must
//! behave the same regardless of provider: stop-sequence detection on decoded
//! text, token budgets, retries on transport failures, the in-flight limit and
//! the optional call log.

mod http;
mod mock;
mod stop;

pub use http::{HttpProvider, HttpProviderConfig, PrefillMode};
pub use mock::{
    ContextPredicate, FnModel, SampledModel, ScriptStep, ScriptedModel,
};
pub use stop::{Scan, StopScanner};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use futures::stream::BoxStream;
use futures::StreamExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.6;
pub const DEFAULT_MAX_NEW_TOKENS: u32 = 65_536;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub stop_sequences: Vec<String>,
    pub seed: Option<u64>,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            stop_sequences: Vec::new(),
            seed: None,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_new_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One generation call. The last message must be the assistant prefill the
/// model continues from.
#[derive(Debug, Clone, PartialEq)]
pub struct GenRequest {
    pub messages: Vec<Message>,
    pub params: GenParams,
    /// Extra cap from the caller's remaining budget. The effective limit is
    /// the smaller of this and `params.max_new_tokens`.
    pub token_limit: Option<u32>,
}

impl GenRequest {
    pub fn new(messages: Vec<Message>, params: GenParams) -> Self {
        Self {
            messages,
            params,
            token_limit: None,
        }
    }

    pub fn effective_limit(&self) -> u32 {
        match self.token_limit {
            Some(l) => l.min(self.params.max_new_tokens),
            None => self.params.max_new_tokens,
        }
    }

    pub fn prefill(&self) -> &str {
        match self.messages.last() {
            Some(m) if m.role == Role::Assistant => &m.content,
            _ => "",
        }
    }

    /// All message contents joined, for predicates and logs.
    pub fn context_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StopSequence(String),
    MaxTokens,
    EndOfMessage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenOutcome {
    pub text: String,
    pub stop_reason: StopReason,
    pub tokens_generated: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    /// Connection-level failure; retried by the gateway.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("mock script exhausted after {calls} calls")]
    ScriptExhausted { calls: usize },
    #[error("mock step {step} predicate failed: {diff}")]
    PredicateFailed { step: usize, diff: String },
}

impl GatewayError {
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::Transport(_))
    }
}

/// What a provider streams back: decoded text pieces and a finish marker.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderChunk {
    Text { text: String, tokens: u32 },
    Finished(ProviderFinish),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderFinish {
    /// The provider halted on one of the request's stop sequences and did not
    /// include it in the text.
    Stop(Option<String>),
    Length,
    End,
}

pub type ChunkStream = BoxStream<'static, Result<ProviderChunk, GatewayError>>;

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> &str;

    async fn open_stream(&self, request: &GenRequest) -> Result<ChunkStream, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            attempts: 1,
            base_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (0-based): 1s, 2s, 4s, ...
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub request: GenRequest,
    /// Sequence numbers from one counter shared by starts and ends, so calls
    /// can be ordered against each other.
    pub start_seq: u64,
    pub end_seq: u64,
    pub outcome: Option<GenOutcome>,
}

/// Shared record of every generation call made through a gateway.
#[derive(Debug, Clone, Default)]
pub struct CallLog {
    inner: Arc<CallLogInner>,
}

#[derive(Debug, Default)]
struct CallLogInner {
    seq: AtomicU64,
    records: Mutex<Vec<CallRecord>>,
}

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn tick(&self) -> u64 {
        self.inner.seq.fetch_add(1, Ordering::SeqCst)
    }

    fn push(&self, record: CallRecord) {
        self.inner.records.lock().unwrap().push(record);
    }

    pub fn records(&self) -> Vec<CallRecord> {
        let mut r = self.inner.records.lock().unwrap().clone();
        r.sort_by_key(|c| c.start_seq);
        r
    }

    pub fn len(&self) -> usize {
        self.inner.records.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.inner.records.lock().unwrap().clear();
    }
}

/// Cheap to clone; clones share the provider, limiter and log.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn CompletionProvider>,
    retry: RetryPolicy,
    include_stop: bool,
    limiter: Option<Arc<Semaphore>>,
    log: Option<CallLog>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.name())
            .field("retry", &self.retry)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn CompletionProvider>) -> Self {
        Self {
            provider,
            retry: RetryPolicy::default(),
            include_stop: true,
            limiter: None,
            log: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Whether a matched stop sequence is kept at the end of the text.
    pub fn with_stop_inclusion(mut self, include: bool) -> Self {
        self.include_stop = include;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.limiter = Some(Arc::new(Semaphore::new(n.max(1))));
        self
    }

    pub fn with_log(mut self, log: CallLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn log(&self) -> Option<&CallLog> {
        self.log.as_ref()
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// Streams a continuation of the request's prefill to `on_chunk`.
    ///
    /// Transient failures are retried with exponential backoff, but only
    /// while nothing has been handed to `on_chunk` yet; a failure after that
    /// is reported as a provider error.
    pub async fn generate_stream(
        &self,
        request: &GenRequest,
        on_chunk: &mut (dyn FnMut(&str) + Send),
    ) -> Result<GenOutcome, GatewayError> {
        if request.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("empty context".into()));
        }
        request.params.validate()?;

        let _permit = match &self.limiter {
            Some(sem) => Some(sem.clone().acquire_owned().await.expect("semaphore closed")),
            None => None,
        };
        let start_seq = self.log.as_ref().map(CallLog::tick).unwrap_or(0);

        let mut attempt = 0;
        let result = loop {
            let mut emitted = false;
            match self.attempt(request, on_chunk, &mut emitted).await {
                Err(e) if e.is_transient() && !emitted && attempt + 1 < self.retry.attempts => {
                    let delay = self.retry.delay(attempt);
                    tracing::warn!(error = %e, attempt, ?delay, "retrying generation");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                Err(GatewayError::Transport(msg)) => {
                    break Err(GatewayError::Provider(format!(
                        "transport failure after {} attempt(s): {msg}",
                        attempt + 1
                    )))
                }
                other => break other,
            }
        };

        if let Some(log) = &self.log {
            log.push(CallRecord {
                request: request.clone(),
                start_seq,
                end_seq: log.tick(),
                outcome: result.as_ref().ok().cloned(),
            });
        }
        result
    }

    /// Collects the whole continuation without a chunk consumer.
    pub async fn generate(&self, request: &GenRequest) -> Result<GenOutcome, GatewayError> {
        self.generate_stream(request, &mut |_| {}).await
    }

    async fn attempt(
        &self,
        request: &GenRequest,
        on_chunk: &mut (dyn FnMut(&str) + Send),
        emitted: &mut bool,
    ) -> Result<GenOutcome, GatewayError> {
        let limit = request.effective_limit();
        let mut stream = self.provider.open_stream(request).await?;
        let mut scanner = StopScanner::new(&request.params.stop_sequences, self.include_stop);
        let mut text = String::new();
        let mut tokens = 0u32;

        let mut emit = |piece: &str, text: &mut String| {
            if !piece.is_empty() {
                *emitted = true;
                text.push_str(piece);
                on_chunk(piece);
            }
        };

        let stop_reason = loop {
            let Some(item) = stream.next().await else {
                break StopReason::EndOfMessage;
            };
            match item? {
                ProviderChunk::Text { text: piece, tokens: n } => {
                    tokens = tokens.saturating_add(n);
                    match scanner.push(&piece) {
                        Scan::Emit(t) => emit(&t, &mut text),
                        Scan::Stopped { emit: t, matched } => {
                            emit(&t, &mut text);
                            break StopReason::StopSequence(matched);
                        }
                    }
                    if tokens >= limit {
                        tokens = limit;
                        break StopReason::MaxTokens;
                    }
                }
                ProviderChunk::Finished(ProviderFinish::Stop(Some(seq)))
                    if request.params.stop_sequences.contains(&seq) =>
                {
                    let rest = scanner.finish();
                    emit(&rest, &mut text);
                    if self.include_stop {
                        emit(&seq, &mut text);
                    }
                    break StopReason::StopSequence(seq);
                }
                ProviderChunk::Finished(ProviderFinish::Length) => break StopReason::MaxTokens,
                ProviderChunk::Finished(_) => break StopReason::EndOfMessage,
            }
        };
        if !matches!(stop_reason, StopReason::StopSequence(_)) {
            let rest = scanner.finish();
            emit(&rest, &mut text);
        }
        Ok(GenOutcome {
            text,
            stop_reason,
            tokens_generated: tokens,
        })
    }
}

/// Settings a provider factory may draw on.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: String,
    #[serde(default)]
    pub http: Option<HttpProviderConfig>,
    /// Path of a JSON script for the `scripted` provider.
    #[serde(default)]
    pub script: Option<std::path::PathBuf>,
    #[serde(default)]
    pub max_in_flight: Option<usize>,
}

pub type ProviderRegistry = Registry<dyn CompletionProvider, ProviderConfig>;

/// `openai` (any OpenAI-compatible streaming chat endpoint) and `scripted`
/// (a JSON list of canned steps).
pub fn default_providers() -> ProviderRegistry {
    let mut reg = ProviderRegistry::new("model provider");
    reg.register("openai", |cfg: &ProviderConfig| {
        let http = cfg
            .http
            .clone()
            .ok_or_else(|| "missing [http] section".to_string())?;
        Ok(Arc::new(HttpProvider::new(http).map_err(|e| e.to_string())?) as Arc<dyn CompletionProvider>)
    });
    reg.register("scripted", |cfg: &ProviderConfig| {
        let path = cfg
            .script
            .as_ref()
            .ok_or_else(|| "missing script path".to_string())?;
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let model = ScriptedModel::from_json(&raw).map_err(|e| e.to_string())?;
        Ok(Arc::new(model) as Arc<dyn CompletionProvider>)
    });
    reg
}
