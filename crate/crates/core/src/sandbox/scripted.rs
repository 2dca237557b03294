use std::collections::HashSet;
use std::sync::Mutex;

use async_trait::async_trait;

use super::{ExecRequest, ExecutionResult, Sandbox, SandboxError};

type Responder = dyn Fn(&ExecRequest, usize) -> Result<ExecutionResult, SandboxError> + Send + Sync;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecLogEntry {
    pub session_id: String,
    pub code: String,
}

/// In-process stand-in for the executor. Session bookkeeping follows the
/// real protocol; execution results come from a closure.
pub struct ScriptedSandbox {
    responder: Box<Responder>,
    sessions: Mutex<HashSet<String>>,
    log: Mutex<Vec<ExecLogEntry>>,
}

impl std::fmt::Debug for ScriptedSandbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScriptedSandbox").finish_non_exhaustive()
    }
}

impl ScriptedSandbox {
    /// `f` receives the request and the global execution index.
    pub fn new(
        f: impl Fn(&ExecRequest, usize) -> Result<ExecutionResult, SandboxError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            responder: Box::new(f),
            sessions: Mutex::new(HashSet::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Replays `results` in order (stdout only, all successful), then keeps
    /// repeating the last one.
    pub fn echo(outputs: Vec<String>) -> Self {
        Self::new(move |req, i| {
            let out = outputs.get(i).or(outputs.last()).cloned().unwrap_or_default();
            Ok(ExecutionResult::success(&req.session_id, out))
        })
    }

    pub fn executed(&self) -> Vec<ExecLogEntry> {
        self.log.lock().unwrap().clone()
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }
}

#[async_trait]
impl Sandbox for ScriptedSandbox {
    async fn open_session(&self, session_id: &str) -> Result<(), SandboxError> {
        if !self.sessions.lock().unwrap().insert(session_id.to_string()) {
            return Err(SandboxError::DuplicateSession(session_id.to_string()));
        }
        Ok(())
    }

    async fn execute(&self, request: &ExecRequest) -> Result<ExecutionResult, SandboxError> {
        if !self.sessions.lock().unwrap().contains(&request.session_id) {
            return Err(SandboxError::UnknownSession(request.session_id.clone()));
        }
        let idx = {
            let mut log = self.log.lock().unwrap();
            log.push(ExecLogEntry {
                session_id: request.session_id.clone(),
                code: request.code.clone(),
            });
            log.len() - 1
        };
        (self.responder)(request, idx)
    }

    async fn close_session(&self, session_id: &str) -> Result<(), SandboxError> {
        if !self.sessions.lock().unwrap().remove(session_id) {
            return Err(SandboxError::UnknownSession(session_id.to_string()));
        }
        Ok(())
    }
}
