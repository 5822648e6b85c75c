//! HTTP front end for graphbench: the agent session protocol, image
//! fetch by content address, the curation endpoints, and blocking clients
//! for remote agents and oracles.

mod images;
mod remote;
mod routes;
mod state;
pub mod wire;

pub use images::ImageIndex;
pub use remote::{connect_http_oracle, HttpAgentFactory, HttpOracle, DEFAULT_AGENT_TIMEOUT};
pub use routes::{router, ApiError};
pub use state::{AppState, CurationConfig, ServiceConfig, SessionHold};
pub use wire::{PROTOCOL_HEADER, PROTOCOL_VERSION};

use std::future::Future;
use std::sync::Arc;

/// Serves until `shutdown` resolves, then lets in-flight requests finish
/// and flushes every session log.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(state.clone());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    state.drain().await;
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
