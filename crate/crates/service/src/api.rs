use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::error::ApiError;
use crate::service::Service;

type Shared = State<Arc<Service>>;

#[derive(Deserialize)]
struct NewSession {
    user_id: String,
}

#[derive(Deserialize)]
struct Revoke {
    positions: Vec<usize>,
}

#[derive(Deserialize)]
struct Interact {
    item: String,
}

#[derive(Deserialize)]
struct ExplainQuery {
    method: Option<String>,
}

/// Parses a JSON body so that malformed input gets the usual error payload.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Runs a service call off the async workers; explanations can take
/// seconds.
async fn run(svc: Arc<Service>, f: impl FnOnce(&Service) -> Result<Value, ApiError> + Send + 'static) -> Response {
    let out = tokio::task::spawn_blocking(move || f(&svc))
        .await
        .unwrap_or_else(|e| Err(ApiError::internal(format!("request worker failed: {e}"))));
    match out {
        Ok(v) => Json(v).into_response(),
        Err(e) => {
            log::debug!("request failed: {e}");
            e.into_response()
        }
    }
}

async fn healthz(State(svc): Shared) -> Response {
    Json(svc.health()).into_response()
}

async fn items(State(svc): Shared) -> Response {
    Json(svc.items()).into_response()
}

async fn create_session(State(svc): Shared, bytes: Bytes) -> Response {
    match body::<NewSession>(&bytes) {
        Ok(req) => run(svc, move |s| s.create_session(&req.user_id)).await,
        Err(e) => e.into_response(),
    }
}

async fn describe(State(svc): Shared, Path(id): Path<String>) -> Response {
    run(svc, move |s| s.describe_session(&id)).await
}

async fn recommendations(State(svc): Shared, Path(id): Path<String>) -> Response {
    run(svc, move |s| s.recommendations(&id)).await
}

async fn explain(State(svc): Shared, Path((id, item)): Path<(String, String)>, Query(q): Query<ExplainQuery>) -> Response {
    run(svc, move |s| s.explain(&id, &item, q.method.as_deref())).await
}

async fn revoke(State(svc): Shared, Path(id): Path<String>, bytes: Bytes) -> Response {
    match body::<Revoke>(&bytes) {
        Ok(req) => run(svc, move |s| s.revoke(&id, &req.positions)).await,
        Err(e) => e.into_response(),
    }
}

async fn interact(State(svc): Shared, Path(id): Path<String>, bytes: Bytes) -> Response {
    match body::<Interact>(&bytes) {
        Ok(req) => run(svc, move |s| s.interact(&id, &req.item)).await,
        Err(e) => e.into_response(),
    }
}

async fn confirm(State(svc): Shared, Path(id): Path<String>) -> Response {
    run(svc, move |s| s.confirm(&id)).await
}

async fn undo(State(svc): Shared, Path(id): Path<String>) -> Response {
    run(svc, move |s| s.undo(&id)).await
}

async fn not_found() -> Response {
    ApiError::new(axum::http::StatusCode::NOT_FOUND, "not_found", "no such endpoint").into_response()
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/items", get(items))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(describe))
        .route("/sessions/{id}/recommendations", get(recommendations))
        .route("/sessions/{id}/explanations/{item}", get(explain))
        .route("/sessions/{id}/revoke", post(revoke))
        .route("/sessions/{id}/interact", post(interact))
        .route("/sessions/{id}/confirm", post(confirm))
        .route("/sessions/{id}/undo", post(undo))
        .fallback(not_found)
        .with_state(service)
}

/// Serves until Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
