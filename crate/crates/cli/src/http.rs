//! HTTP service.
//!
//! `GET /health` answers 503 until snapshots are loaded, then 200.
//! `POST /match` takes `{"query", "type", "conditions"?}` and answers with the
//! same JSON object `affmatch match` prints.

use std::sync::{Arc, RwLock};

use affmatch::{Condition, RegistryKind};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use serde_json::json;

use crate::Loaded;

#[derive(Clone, Default)]
pub struct AppState {
    loaded: Arc<RwLock<Option<Arc<Loaded>>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Publishes loaded snapshots; requests in flight keep the previous set.
    pub fn install(&self, loaded: Loaded) {
        *self.loaded.write().expect("state lock poisoned") = Some(Arc::new(loaded));
    }

    fn current(&self) -> Option<Arc<Loaded>> {
        self.loaded.read().expect("state lock poisoned").clone()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/match", post(match_handler))
        .with_state(state)
}

#[derive(Deserialize)]
struct MatchRequest {
    query: Option<String>,
    #[serde(rename = "type")]
    registry: Option<String>,
    #[serde(default)]
    conditions: Vec<Condition>,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    json_response(status, json!({ "error": message.into() }).to_string())
}

async fn health(State(state): State<AppState>) -> Response {
    match state.current() {
        Some(_) => json_response(StatusCode::OK, json!({"status": "ok"}).to_string()),
        None => json_response(StatusCode::SERVICE_UNAVAILABLE, json!({"status": "loading"}).to_string()),
    }
}

async fn match_handler(State(state): State<AppState>, body: Bytes) -> Response {
    let request: MatchRequest = match serde_json::from_slice(&body) {
        Ok(request) => request,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")),
    };
    let Some(query) = request.query else {
        return error(StatusCode::BAD_REQUEST, "missing `query`");
    };
    let Some(kind) = request.registry else {
        return error(StatusCode::BAD_REQUEST, "missing `type`");
    };
    let registry: RegistryKind = match kind.parse() {
        Ok(registry) => registry,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let Some(loaded) = state.current() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "indexes are still loading");
    };
    if !loaded.snapshots.contains_key(&registry) {
        return error(StatusCode::BAD_REQUEST, format!("registry `{registry}` is not indexed"));
    }
    let conditions = request.conditions;
    let outcome =
        tokio::task::spawn_blocking(move || loaded.match_query(registry, &query, &conditions).map(|o| o.to_json())).await;
    match outcome {
        Ok(Ok(body)) => json_response(StatusCode::OK, body),
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, format!("{e:#}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}
