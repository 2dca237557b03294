//! Code execution back-ends the agent dispatches code blocks to.
//!
//! The real executor is a separate process speaking line-delimited JSON over
//! stdio ([`StdioSandbox`]). [`ScriptedSandbox`] is an in-process stub for
//! tests and [`DisabledSandbox`] answers every execution with a failure.

mod scripted;
mod stdio;

pub use scripted::{ExecLogEntry, ScriptedSandbox};
pub use stdio::{StdioSandbox, StdioSandboxConfig, WireRequest, WireResponse};

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::Registry;

pub const DEFAULT_EXEC_TIMEOUT_MS: u64 = 120_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecStatus {
    Success,
    ExceptionRaised,
    Timeout,
    Killed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecRequest {
    pub session_id: String,
    pub code: String,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub session_id: String,
    pub status: ExecStatus,
    pub stdout: String,
    pub stderr: String,
    pub elapsed_ms: u64,
}

impl ExecutionResult {
    pub fn success(session_id: &str, stdout: impl Into<String>) -> Self {
        Self {
            session_id: session_id.to_string(),
            status: ExecStatus::Success,
            stdout: stdout.into(),
            stderr: String::new(),
            elapsed_ms: 0,
        }
    }

    pub fn exception(session_id: &str, stderr: impl Into<String>) -> Self {
        Self {
            session_id: session_id.to_string(),
            status: ExecStatus::ExceptionRaised,
            stdout: String::new(),
            stderr: stderr.into(),
            elapsed_ms: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SandboxError {
    #[error("session {0:?} already exists")]
    DuplicateSession(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("sandbox unavailable: {0}")]
    Unavailable(String),
}

#[async_trait]
pub trait Sandbox: Send + Sync {
    async fn open_session(&self, session_id: &str) -> Result<(), SandboxError>;

    async fn execute(&self, request: &ExecRequest) -> Result<ExecutionResult, SandboxError>;

    async fn close_session(&self, session_id: &str) -> Result<(), SandboxError>;
}

/// Accepts sessions but never runs code.
#[derive(Debug, Default)]
pub struct DisabledSandbox;

#[async_trait]
impl Sandbox for DisabledSandbox {
    async fn open_session(&self, _session_id: &str) -> Result<(), SandboxError> {
        Ok(())
    }

    async fn execute(&self, request: &ExecRequest) -> Result<ExecutionResult, SandboxError> {
        Ok(ExecutionResult {
            session_id: request.session_id.clone(),
            status: ExecStatus::Killed,
            stdout: String::new(),
            stderr: "code execution is not available in this environment".into(),
            elapsed_ms: 0,
        })
    }

    async fn close_session(&self, _session_id: &str) -> Result<(), SandboxError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SandboxConfig {
    pub kind: String,
    #[serde(default)]
    pub stdio: Option<StdioSandboxConfig>,
}

pub type SandboxRegistry = Registry<dyn Sandbox, SandboxConfig>;

pub fn default_sandboxes() -> SandboxRegistry {
    let mut reg = SandboxRegistry::new("sandbox");
    reg.register("disabled", |_: &SandboxConfig| Ok(Arc::new(DisabledSandbox) as Arc<dyn Sandbox>));
    reg.register("stdio", |cfg: &SandboxConfig| {
        let stdio = cfg
            .stdio
            .clone()
            .ok_or_else(|| "missing [stdio] section".to_string())?;
        Ok(Arc::new(StdioSandbox::new(stdio)) as Arc<dyn Sandbox>)
    });
    reg
}
