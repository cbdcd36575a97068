//! JSON over HTTP.
//!
//! | route                              | answer                                   |
//! |------------------------------------|------------------------------------------|
//! | `GET /api/health`                  | `{"status":"ok","model_version":...}`    |
//! | `POST /api/sessions`               | `{"session_id":...}`                     |
//! | `POST /api/sessions/{id}/messages` | `{"responses":[...]}` for `{"text":...}` |
//! | `GET /api/sessions/{id}/debug`     | the session's tracker                    |
//!
//! Unknown sessions are 404, unreadable bodies 400, and everything except
//! health is 503 until the models have loaded.

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use odbot_core::dialogue::{BotResponse, Tracker};
use odbot_core::service::{handle_message, Pipeline, SessionStore};
use odbot_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

struct Shared {
    pipeline: OnceLock<Pipeline>,
    sessions: SessionStore,
}

/// Shared server state. The pipeline is set once, after loading.
#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(session_ttl: Duration) -> Self {
        AppState(Arc::new(Shared {
            pipeline: OnceLock::new(),
            sessions: SessionStore::new(session_ttl),
        }))
    }

    pub fn ready(pipeline: Pipeline, session_ttl: Duration) -> Self {
        let state = AppState::new(session_ttl);
        state.set_pipeline(pipeline);
        state
    }

    /// Installs the pipeline. Later calls are ignored.
    pub fn set_pipeline(&self, pipeline: Pipeline) {
        if self.0.pipeline.set(pipeline).is_err() {
            log::warn!("pipeline already loaded; ignoring the new one");
        }
    }

    pub fn pipeline(&self) -> Option<&Pipeline> {
        self.0.pipeline.get()
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.0.sessions
    }
}

#[derive(Debug, Deserialize)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageResponse {
    pub responses: Vec<BotResponse>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

enum ApiError {
    Loading,
    NotFound(String),
    BadRequest(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::Loading => (StatusCode::SERVICE_UNAVAILABLE, "models are still loading".to_string()),
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, format!("unknown session `{id}`")),
            ApiError::BadRequest(reason) => (StatusCode::BAD_REQUEST, reason),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

fn session_error(e: Error) -> ApiError {
    match e {
        Error::SessionNotFound(id) => ApiError::NotFound(id),
        other => ApiError::BadRequest(other.to_string()),
    }
}

fn pipeline(state: &AppState) -> Result<&Pipeline, ApiError> {
    state.pipeline().ok_or(ApiError::Loading)
}

async fn health(State(state): State<AppState>) -> Response {
    match state.pipeline() {
        Some(p) => Json(json!({ "status": "ok", "model_version": p.model_version() })).into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "loading" })),
        )
            .into_response(),
    }
}

async fn create_session(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    pipeline(&state)?;
    let session_id = state.sessions().create();
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id })))
}

fn parse_message(body: &[u8]) -> Result<MessageRequest, ApiError> {
    let bad = |reason: String| ApiError::BadRequest(format!("expected {{\"text\": string}}: {reason}"));
    let value: serde_json::Value = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
    // serde would also accept `["hi"]` for a one-field struct.
    if !value.is_object() {
        return Err(bad("body is not an object".to_string()));
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<MessageResponse>, ApiError> {
    let pipeline = pipeline(&state)?;
    let request = parse_message(&body)?;
    // The per-session lock is held for the whole turn, so concurrent posts
    // to one session are answered one after the other.
    let responses = handle_message(state.sessions(), &id, &request.text, pipeline).map_err(session_error)?;
    Ok(Json(MessageResponse { responses }))
}

async fn debug_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Tracker>, ApiError> {
    pipeline(&state)?;
    state.sessions().snapshot(&id).map(Json).map_err(session_error)
}

fn cors(allowed_origins: &[String]) -> anyhow::Result<CorsLayer> {
    let origin = if allowed_origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        let origins = allowed_origins
            .iter()
            .map(|o| HeaderValue::from_str(o).with_context(|| format!("invalid origin `{o}`")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        AllowOrigin::list(origins)
    };
    Ok(CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]))
}

/// Builds the API. Browser requests are accepted only from
/// `allowed_origins` (`*` allows any); with none given, no CORS headers are
/// sent.
pub fn router(state: AppState, allowed_origins: &[String]) -> anyhow::Result<Router> {
    let router = Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/debug", get(debug_session))
        .with_state(state);
    if allowed_origins.is_empty() {
        Ok(router)
    } else {
        Ok(router.layer(cors(allowed_origins)?))
    }
}
