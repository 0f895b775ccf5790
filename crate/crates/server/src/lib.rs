//! HTTP service over the core library: document upload and storage, chat and
//! highlight actions streamed as server-sent events, Leitner quizzes and
//! learner profiles.

pub mod api;
pub mod config;
pub mod error;
pub mod ids;
pub mod state;
pub mod storage;

use std::sync::Arc;

use tokio::net::TcpListener;

pub use api::router;
pub use config::{Cli, ServerConfig};
pub use state::{AppState, SharedState};

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(Arc::new(state));
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
