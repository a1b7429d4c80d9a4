//! Local HTTP service for curating a working state: browse and sort cited
//! references, review clusters, record decisions, merge, filter years and
//! read the year spectrum. Binds to the loopback interface only.

mod routes;
pub mod session;

use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use tokio::net::TcpListener;
use tokio::sync::RwLock;

pub use routes::router;
pub use session::{ApiSession, MergeSummary, RemoveSummary, SessionError};

/// Session shared by all request handlers. Mutations hold the write lock, so
/// they apply one at a time; readers see a complete state.
pub type SharedSession = Arc<RwLock<ApiSession>>;

pub fn shared(session: ApiSession) -> SharedSession {
    Arc::new(RwLock::new(session))
}

/// Serves `session` on `127.0.0.1:port` until interrupted. Static UI assets
/// come from `assets` when given.
pub async fn serve(session: ApiSession, port: u16, assets: Option<PathBuf>) -> std::io::Result<()> {
    let listener = TcpListener::bind(SocketAddr::from((Ipv4Addr::LOCALHOST, port))).await?;
    log::info!(
        "serving {} on http://{}",
        session.state_path().display(),
        listener.local_addr()?
    );
    let session = shared(session);
    let app = router(session.clone(), assets);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if session.read().await.is_dirty() {
        log::warn!("unsaved changes discarded");
    }
    Ok(())
}
