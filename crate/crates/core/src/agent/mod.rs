//! The tool-augmented reasoning loop.
//!
//! The model thinks inside one growing assistant message. Whenever it closes
//! a code block, generation pauses, the code runs in the trace's sandbox
//! session, and the rendered result is appended to the same message wrapped
//! in result tags before generation resumes.

mod context;
mod render;
mod runtime;

pub use context::{prepare_context, DEFAULT_GUIDANCE};
pub use render::{defang, render_execution};
pub use runtime::Agent;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm_gateway::GenParams;
use crate::sandbox::{SandboxError, DEFAULT_EXEC_TIMEOUT_MS};
use crate::stream_parser::{SegmentKind, TagSet};

pub const DEFAULT_ANSWER_MARKER: &str = "Final Answer:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Inserted right after the think-open tag of the assistant prefill.
    pub guidance_text: String,
    /// Shared by every generation call of a trace. `max_new_tokens` is the
    /// token budget of the whole trace.
    pub gen_params: GenParams,
    pub max_interactions: u32,
    #[serde(with = "secs")]
    pub max_wall_clock: Duration,
    /// Rendered execution results longer than this many bytes are elided in
    /// the middle.
    pub exec_result_char_cap: usize,
    pub exec_timeout_ms: u64,
    pub answer_marker: String,
    /// After an interaction or wall-clock cap, close the thinking region and
    /// ask once more for an answer without running tools.
    pub best_effort_answer: bool,
    pub final_answer_nudge: String,
    /// When false, code blocks are left as plain text and never executed.
    pub tools_enabled: bool,
    pub tags: TagSet,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_secs())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs(u64::deserialize(d)?))
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        let tags = TagSet::default();
        Self {
            guidance_text: DEFAULT_GUIDANCE.to_string(),
            gen_params: GenParams {
                stop_sequences: vec![tags.code_close().to_string()],
                ..GenParams::default()
            },
            max_interactions: 20,
            max_wall_clock: Duration::from_secs(30 * 60),
            exec_result_char_cap: 8_192,
            exec_timeout_ms: DEFAULT_EXEC_TIMEOUT_MS,
            answer_marker: DEFAULT_ANSWER_MARKER.to_string(),
            best_effort_answer: true,
            final_answer_nudge: "\n\nI have reached the limit for tool use, so I will stop here and give my final answer.\n"
                .to_string(),
            tools_enabled: true,
            tags,
        }
    }
}

impl AgentConfig {
    /// Plain reasoning without guidance or tools.
    pub fn without_tools(mut self) -> Self {
        self.guidance_text.clear();
        self.gen_params.stop_sequences.clear();
        self.tools_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_interactions == 0 {
            return Err(AgentError::Config("max_interactions must be at least 1".into()));
        }
        if self.exec_result_char_cap == 0 || self.exec_timeout_ms == 0 || self.max_wall_clock.is_zero() {
            return Err(AgentError::Config("caps must be positive".into()));
        }
        let close = self.tags.code_close();
        if self.tools_enabled && !self.gen_params.stop_sequences.iter().any(|s| s == close) {
            return Err(AgentError::Config(format!("stop_sequences must include {close:?} when tools are enabled")));
        }
        self.gen_params
            .validate()
            .map_err(|e| AgentError::Config(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Answered,
    InteractionCap,
    TokenCap,
    WallClockCap,
    ProviderFailure,
    /// The model stopped on its own without producing an answer.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSegment {
    pub kind: SegmentKind,
    pub text: String,
    /// Set on execution results the runtime appended.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub injected: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceTiming {
    pub generation_ms: u64,
    pub execution_ms: u64,
    pub total_ms: u64,
}

/// Full record of one agent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub query: String,
    pub role_prompt: String,
    pub segments: Vec<TraceSegment>,
    pub interactions: u32,
    pub answer: Option<String>,
    /// Tokens generated by each generation call, in order.
    pub token_usage: Vec<u32>,
    pub timing: TraceTiming,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trace {
    /// Trimmed text of the answer segment, if any.
    pub fn answer_text(&self) -> Option<&str> {
        self.segments
            .iter()
            .rev()
            .find(|s| s.kind == SegmentKind::Answer)
            .map(|s| s.text.trim())
            .filter(|s| !s.is_empty())
    }

    pub fn total_tokens(&self) -> u64 {
        self.token_usage.iter().map(|&t| u64::from(t)).sum()
    }

    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }
}

/// Answer text, narrowed to whatever follows the last `marker` if present.
pub fn extract_answer(trace: &Trace, marker: &str) -> Option<String> {
    trace.answer_text().and_then(|a| extract_from_text(a, marker))
}

pub fn extract_from_text(answer: &str, marker: &str) -> Option<String> {
    let narrowed = match (marker.is_empty(), answer.rfind(marker)) {
        (false, Some(pos)) => &answer[pos + marker.len()..],
        _ => answer,
    };
    let t = narrowed.trim();
    (!t.is_empty()).then(|| t.to_string())
}
