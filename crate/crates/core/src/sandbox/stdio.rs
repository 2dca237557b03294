//! Client side of the executor's stdio protocol.
//!
//! Requests and responses are single JSON objects, one per line:
//!
//! ```text
//! -> {"op":"exec","session_id":"s1","code":"print(1)","timeout_ms":120000}
//! <- {"op":"exec","session_id":"s1","status":"Success","stdout":"1\n","stderr":"","elapsed_ms":3}
//! ```
//!
//! Responses for different sessions may interleave; within a session the
//! executor answers in request order.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::process::Stdio;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncWrite, AsyncWriteExt, BufReader};
use tokio::sync::oneshot;

use super::{ExecRequest, ExecStatus, ExecutionResult, Sandbox, SandboxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireOp {
    Open,
    Exec,
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub op: WireOp,
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub op: WireOp,
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ExecStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stdout: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StdioSandboxConfig {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    /// Exported to the executor as `TOOL_SERVICE_URL`.
    #[serde(default)]
    pub tool_service_url: Option<String>,
    /// Extra time allowed past an execution's own timeout before the client
    /// gives up on a response.
    #[serde(default = "default_grace_ms")]
    pub response_grace_ms: u64,
}

fn default_grace_ms() -> u64 {
    10_000
}

type Pending = Arc<Mutex<HashMap<String, VecDeque<oneshot::Sender<WireResponse>>>>>;

struct Connection {
    writer: tokio::sync::Mutex<Box<dyn AsyncWrite + Send + Unpin>>,
    pending: Pending,
    alive: Arc<AtomicBool>,
    _child: Option<tokio::process::Child>,
}

impl Connection {
    fn start(
        reader: impl AsyncRead + Send + Unpin + 'static,
        writer: impl AsyncWrite + Send + Unpin + 'static,
        child: Option<tokio::process::Child>,
    ) -> Self {
        let pending: Pending = Arc::default();
        let alive = Arc::new(AtomicBool::new(true));
        let (p, a) = (pending.clone(), alive.clone());
        tokio::spawn(async move {
            let mut lines = BufReader::new(reader).lines();
            while let Ok(Some(line)) = lines.next_line().await {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<WireResponse>(&line) {
                    Ok(resp) => {
                        let tx = p
                            .lock()
                            .unwrap()
                            .get_mut(&resp.session_id)
                            .and_then(VecDeque::pop_front);
                        match tx {
                            Some(tx) => {
                                let _ = tx.send(resp);
                            }
                            None => tracing::warn!(session = %resp.session_id, "unsolicited executor response"),
                        }
                    }
                    Err(e) => tracing::warn!(error = %e, "malformed executor line"),
                }
            }
            a.store(false, Ordering::SeqCst);
            // Dropping the senders wakes every waiter with an error.
            p.lock().unwrap().clear();
        });
        Self {
            writer: tokio::sync::Mutex::new(Box::new(writer)),
            pending,
            alive,
            _child: child,
        }
    }

    async fn call(&self, req: &WireRequest, wait: Duration) -> Result<WireResponse, SandboxError> {
        let (tx, rx) = oneshot::channel();
        self.pending
            .lock()
            .unwrap()
            .entry(req.session_id.clone())
            .or_default()
            .push_back(tx);
        let mut line = serde_json::to_string(req).map_err(|e| SandboxError::Protocol(e.to_string()))?;
        line.push('\n');
        {
            let mut w = self.writer.lock().await;
            let written = async {
                w.write_all(line.as_bytes()).await?;
                w.flush().await
            };
            if let Err(e) = written.await {
                self.alive.store(false, Ordering::SeqCst);
                return Err(SandboxError::Unavailable(format!("write failed: {e}")));
            }
        }
        match tokio::time::timeout(wait, rx).await {
            Ok(Ok(resp)) => Ok(resp),
            Ok(Err(_)) => Err(SandboxError::Unavailable("executor exited".into())),
            Err(_) => Err(SandboxError::Unavailable(format!(
                "no response within {} ms",
                wait.as_millis()
            ))),
        }
    }
}

/// Talks to an executor process. If the process dies it is respawned on the
/// next `open_session`; sessions that lived in it are gone.
pub struct StdioSandbox {
    config: Option<StdioSandboxConfig>,
    conn: tokio::sync::Mutex<Option<Arc<Connection>>>,
    control_wait: Duration,
    grace: Duration,
}

impl StdioSandbox {
    pub fn new(config: StdioSandboxConfig) -> Self {
        let grace = Duration::from_millis(config.response_grace_ms);
        Self {
            config: Some(config),
            conn: tokio::sync::Mutex::new(None),
            control_wait: Duration::from_secs(30),
            grace,
        }
    }

    /// Uses an already-connected transport (no respawning).
    pub fn from_io(
        reader: impl AsyncRead + Send + Unpin + 'static,
        writer: impl AsyncWrite + Send + Unpin + 'static,
    ) -> Self {
        Self {
            config: None,
            conn: tokio::sync::Mutex::new(Some(Arc::new(Connection::start(reader, writer, None)))),
            control_wait: Duration::from_secs(30),
            grace: Duration::from_millis(default_grace_ms()),
        }
    }

    pub fn is_alive(&self) -> bool {
        match self.conn.try_lock() {
            Ok(g) => g.as_ref().is_some_and(|c| c.alive.load(Ordering::SeqCst)),
            Err(_) => true,
        }
    }

    async fn connection(&self, respawn: bool) -> Result<Arc<Connection>, SandboxError> {
        let mut guard = self.conn.lock().await;
        if let Some(c) = guard.as_ref() {
            if c.alive.load(Ordering::SeqCst) {
                return Ok(c.clone());
            }
        }
        let Some(cfg) = self.config.as_ref().filter(|_| respawn || guard.is_none()) else {
            return Err(SandboxError::Unavailable("executor is not running".into()));
        };
        let conn = Arc::new(spawn(cfg)?);
        *guard = Some(conn.clone());
        Ok(conn)
    }
}

fn spawn(cfg: &StdioSandboxConfig) -> Result<Connection, SandboxError> {
    let mut cmd = tokio::process::Command::new(&cfg.command);
    cmd.args(&cfg.args)
        .envs(&cfg.env)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .kill_on_drop(true);
    if let Some(url) = &cfg.tool_service_url {
        cmd.env("TOOL_SERVICE_URL", url);
    }
    let mut child = cmd
        .spawn()
        .map_err(|e| SandboxError::Unavailable(format!("cannot start {}: {e}", cfg.command)))?;
    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    Ok(Connection::start(stdout, stdin, Some(child)))
}

fn check_error(resp: &WireResponse) -> Result<(), SandboxError> {
    match resp.error.as_deref() {
        None => Ok(()),
        Some(e) if e.starts_with("DuplicateSession") => Err(SandboxError::DuplicateSession(resp.session_id.clone())),
        Some(e) if e.starts_with("UnknownSession") => Err(SandboxError::UnknownSession(resp.session_id.clone())),
        Some(e) => Err(SandboxError::Protocol(e.to_string())),
    }
}

#[async_trait]
impl Sandbox for StdioSandbox {
    async fn open_session(&self, session_id: &str) -> Result<(), SandboxError> {
        let conn = self.connection(true).await?;
        let resp = conn
            .call(
                &WireRequest {
                    op: WireOp::Open,
                    session_id: session_id.to_string(),
                    code: None,
                    timeout_ms: None,
                },
                self.control_wait,
            )
            .await?;
        check_error(&resp)
    }

    async fn execute(&self, request: &ExecRequest) -> Result<ExecutionResult, SandboxError> {
        let conn = self.connection(false).await?;
        let resp = conn
            .call(
                &WireRequest {
                    op: WireOp::Exec,
                    session_id: request.session_id.clone(),
                    code: Some(request.code.clone()),
                    timeout_ms: Some(request.timeout_ms),
                },
                Duration::from_millis(request.timeout_ms) + self.grace,
            )
            .await?;
        check_error(&resp)?;
        let status = resp
            .status
            .ok_or_else(|| SandboxError::Protocol("exec response without status".into()))?;
        Ok(ExecutionResult {
            session_id: resp.session_id,
            status,
            stdout: resp.stdout.unwrap_or_default(),
            stderr: resp.stderr.unwrap_or_default(),
            elapsed_ms: resp.elapsed_ms.unwrap_or(0),
        })
    }

    async fn close_session(&self, session_id: &str) -> Result<(), SandboxError> {
        let conn = self.connection(false).await?;
        let resp = conn
            .call(
                &WireRequest {
                    op: WireOp::Close,
                    session_id: session_id.to_string(),
                    code: None,
                    timeout_ms: None,
                },
                self.control_wait,
            )
            .await?;
        check_error(&resp)
    }
}
