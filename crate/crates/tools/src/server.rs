use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::cassette::{Endpoint, Reply};
use crate::error::ToolError;
use crate::service::ToolService;

/// `POST /v1/search`, `POST /v1/parse`, `GET /healthz`.
pub fn router(service: Arc<ToolService>) -> Router {
    Router::new()
        .route("/v1/search", post(search))
        .route("/v1/parse", post(parse))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(service)
}

async fn search(State(svc): State<Arc<ToolService>>, body: Bytes) -> Response {
    json_response(svc.call(Endpoint::Search, &body).await)
}

async fn parse(State(svc): State<Arc<ToolService>>, body: Bytes) -> Response {
    json_response(svc.call(Endpoint::Parse, &body).await)
}

fn json_response(reply: Reply) -> Response {
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, "application/json")], reply.to_bytes()).into_response()
}

/// A running server. Dropping it leaves the server running; call
/// [`ServiceHandle::shutdown`] to stop it.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }

    /// Runs until the server stops on its own.
    pub async fn wait(self) -> std::io::Result<()> {
        let _keep = self.stop;
        self.task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub async fn serve(service: Arc<ToolService>, addr: SocketAddr) -> Result<ServiceHandle, ToolError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ToolError::PortInUse(addr.port()),
        _ => ToolError::BadConfig(format!("bind {addr}: {e}")),
    })?;
    let addr = listener.local_addr().map_err(|e| ToolError::BadConfig(e.to_string()))?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(service);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%addr, "tool service listening");
    Ok(ServiceHandle {
        addr,
        stop: Some(tx),
        task,
    })
}
