//! HTTP front end over [`crate::api`].
//!
//! The current snapshot sits behind a lock as an `Arc`. Readers clone the
//! `Arc` and release the lock at once; `/api/q` builds a whole new snapshot
//! and swaps the pointer, so a request sees either the old or the new
//! threshold and never a mixture.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pas_core::Snapshot;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::api::{self, ApiError, ApiResult, HistogramQuery, ListingsQuery};

pub const DEFAULT_PORT: u16 = 8080;

pub struct AppState {
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

impl AppState {
    pub fn new(snapshot: Snapshot) -> Arc<Self> {
        Arc::new(AppState { current: RwLock::new(Arc::new(snapshot)), writer: Mutex::new(()) })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock").clone()
    }

    fn swap(&self, next: Snapshot) {
        *self.current.write().expect("snapshot lock") = Arc::new(next);
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::BAD_REQUEST);
        (status, Json(self.body())).into_response()
    }
}

fn respond(result: ApiResult) -> Response {
    match result {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

fn bad_query(e: impl std::fmt::Display) -> Response {
    ApiError::bad_request("InvalidQuery", e.to_string()).into_response()
}

async fn get_snapshot(State(state): State<Arc<AppState>>) -> Response {
    respond(api::snapshot_meta(&state.snapshot()))
}

async fn get_listings(
    State(state): State<Arc<AppState>>,
    query: Result<Query<ListingsQuery>, axum::extract::rejection::QueryRejection>,
) -> Response {
    match query {
        Ok(Query(q)) => respond(api::listings(&state.snapshot(), &q)),
        Err(e) => bad_query(e),
    }
}

async fn get_histogram(
    State(state): State<Arc<AppState>>,
    query: Result<Query<HistogramQuery>, axum::extract::rejection::QueryRejection>,
) -> Response {
    match query {
        Ok(Query(q)) => respond(api::histogram(&state.snapshot(), &q)),
        Err(e) => bad_query(e),
    }
}

async fn get_pca(State(state): State<Arc<AppState>>) -> Response {
    respond(api::pca(&state.snapshot()))
}

async fn get_attribution(State(state): State<Arc<AppState>>) -> Response {
    respond(api::attribution(&state.snapshot()))
}

async fn post_q(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let update = match api::parse_q_update(&body) {
        Ok(u) => u,
        Err(e) => return e.into_response(),
    };
    // One writer at a time so concurrent updates cannot drop each other.
    let _guard = state.writer.lock().await;
    let current = state.snapshot();
    match api::update_q(&current, &update) {
        Ok((next, response)) => {
            state.swap(next);
            Json(response).into_response()
        }
        Err(e) => e.into_response(),
    }
}

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>PAS explorer</title></head>\n<body><h1>PAS snapshot API</h1>\n<p>No UI assets were configured. Endpoints:\n<a href=\"/api/snapshot\">/api/snapshot</a>, <a href=\"/api/listings\">/api/listings</a>,\n<a href=\"/api/histogram\">/api/histogram</a>, <a href=\"/api/pca\">/api/pca</a>,\n<a href=\"/api/attribution\">/api/attribution</a>, POST /api/q.</p></body></html>\n";

pub fn router(state: Arc<AppState>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/snapshot", get(get_snapshot))
        .route("/api/listings", get(get_listings))
        .route("/api/histogram", get(get_histogram))
        .route("/api/pca", get(get_pca))
        .route("/api/attribution", get(get_attribution))
        .route("/api/q", post(post_q))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

/// Port from the flag, then `PAS_PORT`, then 8080.
pub fn resolve_port(flag: Option<u16>) -> Result<u16, String> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match std::env::var("PAS_PORT") {
        Ok(v) => v.trim().parse().map_err(|_| format!("PAS_PORT is not a port number: {v:?}")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

/// Binds and serves until interrupted. `on_bound` receives the actual
/// address, which matters when binding port 0.
pub async fn serve(
    snapshot: Snapshot,
    addr: SocketAddr,
    assets: Option<PathBuf>,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    let app = router(AppState::new(snapshot), assets);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_flag_wins() {
        assert_eq!(resolve_port(Some(9000)), Ok(9000));
    }
}
