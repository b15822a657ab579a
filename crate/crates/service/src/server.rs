//! Running routers: in the foreground for the CLI, on a background thread
//! for tests.

use std::net::SocketAddr;
use std::thread::JoinHandle;

use axum::extract::Path;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{body::Bytes, Json, Router};
use tokio::sync::oneshot;
use wavcraft_core::backend::protocol::serve_stub;

/// Model server answering every operation with the local stubs, speaking
/// the same wire format as a real deployment.
pub fn stub_backend_router() -> Router {
    Router::new().route(
        "/v1/ops/{op}",
        post(|Path(op): Path<String>, body: Bytes| async move {
            let (status, value) =
                tokio::task::spawn_blocking(move || serve_stub(&op, &body)).await.unwrap_or_else(|e| {
                    (500, serde_json::json!({"error": {"code": "internal", "message": e.to_string()}}))
                });
            (StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR), Json(value))
        }),
    )
}

/// Serves until Ctrl-C.
pub async fn serve(router: Router, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// A server on its own thread and runtime, stopped on drop.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on a background
/// thread.
pub fn spawn(router: Router, addr: &str) -> std::io::Result<ServerHandle> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener registers with the runtime");
            let _ = axum::serve(listener, router)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle { addr: local, shutdown: Some(tx), thread: Some(thread) })
}
