//! Elicitation sessions over JSON/HTTP.
//!
//! Every state change is appended to a line-delimited log before it is
//! applied, so a restarted service rebuilds its sessions by replaying the log.

mod api;
mod error;
mod store;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::{
    router, ChoiceRequest, ChoiceResponse, CreateRequest, CreateResponse, Health, IndexEstimates, NextResponse,
    PartitionConfig, Progress, ResultResponse, STAKE_TEXT,
};
pub use error::{ErrorBody, ErrorDetail, ServiceError};
pub use store::{read_log, replay, LogEvent, SeedSource, SessionStore, StoreError};

/// Serves `store` on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr, store: Arc<SessionStore>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}
