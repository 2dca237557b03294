//! OpenAI-compatible chat completions over server-sent events.

use std::collections::VecDeque;
use std::time::Duration;

use async_trait::async_trait;
use futures::StreamExt;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChunkStream, CompletionProvider, GatewayError, GenRequest, ProviderChunk, ProviderFinish, Role};

/// How the final assistant message is marked as a prefix to continue.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefillMode {
    /// `continue_final_message: true, add_generation_prompt: false`
    /// (vLLM, SGLang).
    #[default]
    ContinueFinalMessage,
    /// `prefix: true` on the last assistant message (DeepSeek beta API).
    PrefixFlag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    /// Base URL, e.g. `https://api.example.com/v1`.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub prefill_mode: PrefillMode,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    "LLM_API_KEY".to_string()
}

fn default_timeout() -> u64 {
    3600
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    client: reqwest::Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub(crate) fn body(&self, request: &GenRequest) -> Value {
        let n = request.messages.len();
        let messages: Vec<Value> = request
            .messages
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut v = json!({ "role": m.role, "content": m.content });
                if i + 1 == n && m.role == Role::Assistant && self.config.prefill_mode == PrefillMode::PrefixFlag {
                    v["prefix"] = json!(true);
                }
                v
            })
            .collect();
        let p = &request.params;
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": p.temperature,
            "max_tokens": request.effective_limit(),
            "stream": true,
        });
        if !p.stop_sequences.is_empty() {
            body["stop"] = json!(p.stop_sequences);
        }
        if let Some(seed) = p.seed {
            body["seed"] = json!(seed);
        }
        if self.config.prefill_mode == PrefillMode::ContinueFinalMessage
            && request.messages.last().map(|m| m.role) == Some(Role::Assistant)
        {
            body["continue_final_message"] = json!(true);
            body["add_generation_prompt"] = json!(false);
        }
        body
    }
}

#[async_trait]
impl CompletionProvider for HttpProvider {
    fn name(&self) -> &str {
        "openai"
    }

    async fn open_stream(&self, request: &GenRequest) -> Result<ChunkStream, GatewayError> {
        let key = std::env::var(&self.config.api_key_env).map_err(|_| {
            GatewayError::Auth(format!("environment variable {} is not set", self.config.api_key_env))
        })?;
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let resp = self
            .client
            .post(url)
            .bearer_auth(key)
            .json(&self.body(request))
            .send()
            .await
            .map_err(|e| GatewayError::Transport(e.to_string()))?;

        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().await.unwrap_or_default();
            let msg = format!("HTTP {status}: {}", body.chars().take(500).collect::<String>());
            return Err(match status.as_u16() {
                401 | 403 => GatewayError::Auth(msg),
                429 | 500..=599 => GatewayError::Transport(msg),
                _ => GatewayError::Provider(msg),
            });
        }

        let bytes = resp.bytes_stream();
        let state = (bytes, SseDecoder::default(), VecDeque::<ProviderChunk>::new(), false);
        let stream = futures::stream::unfold(state, |(mut bytes, mut dec, mut queue, mut done)| async move {
            loop {
                if let Some(chunk) = queue.pop_front() {
                    return Some((Ok(chunk), (bytes, dec, queue, done)));
                }
                if done {
                    return None;
                }
                match bytes.next().await {
                    Some(Ok(b)) => {
                        for data in dec.push(&b) {
                            match parse_event(&data) {
                                Ok(Some(SseItem::Chunks(cs))) => queue.extend(cs),
                                Ok(Some(SseItem::Done)) => done = true,
                                Ok(None) => {}
                                Err(e) => {
                                    done = true;
                                    return Some((Err(e), (bytes, dec, queue, done)));
                                }
                            }
                        }
                    }
                    Some(Err(e)) => {
                        done = true;
                        return Some((Err(GatewayError::Transport(e.to_string())), (bytes, dec, queue, done)));
                    }
                    None => done = true,
                }
            }
        });
        Ok(stream.boxed())
    }
}

/// Splits a byte stream into SSE `data:` payloads.
#[derive(Debug, Default)]
pub(crate) struct SseDecoder {
    buf: Vec<u8>,
    data: Vec<String>,
}

impl SseDecoder {
    pub(crate) fn push(&mut self, bytes: &[u8]) -> Vec<String> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        while let Some(nl) = self.buf.iter().position(|&b| b == b'\n') {
            let line: Vec<u8> = self.buf.drain(..=nl).collect();
            let line = String::from_utf8_lossy(&line);
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                if !self.data.is_empty() {
                    out.push(self.data.join("\n"));
                    self.data.clear();
                }
            } else if let Some(rest) = line.strip_prefix("data:") {
                self.data.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
            }
        }
        out
    }
}

#[derive(Debug, PartialEq)]
pub(crate) enum SseItem {
    Chunks(Vec<ProviderChunk>),
    Done,
}

pub(crate) fn parse_event(data: &str) -> Result<Option<SseItem>, GatewayError> {
    if data.trim() == "[DONE]" {
        return Ok(Some(SseItem::Done));
    }
    let v: Value = serde_json::from_str(data)
        .map_err(|e| GatewayError::Provider(format!("bad stream event: {e}")))?;
    if let Some(err) = v.get("error") {
        return Err(GatewayError::Provider(err.to_string()));
    }
    let Some(choice) = v["choices"].get(0) else {
        return Ok(None);
    };
    let mut chunks = Vec::new();
    if let Some(text) = choice["delta"]["content"].as_str() {
        if !text.is_empty() {
            chunks.push(ProviderChunk::Text {
                text: text.to_string(),
                tokens: 1,
            });
        }
    }
    match choice["finish_reason"].as_str() {
        Some("stop") => chunks.push(ProviderChunk::Finished(ProviderFinish::Stop(
            choice["stop_reason"].as_str().map(str::to_string),
        ))),
        Some("length") => chunks.push(ProviderChunk::Finished(ProviderFinish::Length)),
        Some(_) => chunks.push(ProviderChunk::Finished(ProviderFinish::End)),
        None => {}
    }
    Ok(Some(SseItem::Chunks(chunks)))
}
