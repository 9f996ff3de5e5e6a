//! HTTP front end for [`SessionStore`].
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/sessions` | `SessionConfig` | `SessionState` |
//! | GET | `/sessions/{id}` | | `SessionState` |
//! | POST | `/sessions/{id}/feedback` | `FeedbackRequest` | `SessionState` |
//! | GET | `/sessions/{id}/preview?value=v` | | `ScannerDisplay` |
//! | GET | `/sessions/{id}/export` | | array of `SessionLog` |
//!
//! Errors come back as `{"error": "..."}` with status 400 (bad request),
//! 403 (preview without sync), 404 (unknown session) or 409 (wrong phase).

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use teachlab::error::{SessionError, TeachingError};
use teachlab::session::{FeedbackRequest, ScannerDisplay, SessionConfig, SessionState, SessionStore};
use teachlab::SessionLog;

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match &self.0 {
            SessionError::BadRequest(_) => StatusCode::BAD_REQUEST,
            SessionError::PreviewForbidden => StatusCode::FORBIDDEN,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Teaching(TeachingError::FeedbackOutOfRange { .. } | TeachingError::BadDoNothing(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Parse a JSON body, reporting schema errors (such as an unknown condition
/// tag) as 400 rather than axum's default 422.
fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(SessionError::BadRequest(e.to_string())))
}

async fn create(State(store): State<Arc<SessionStore>>, body: Bytes) -> ApiResult<SessionState> {
    let cfg: SessionConfig = parse_body(&body)?;
    Ok(Json(store.create_session(cfg)?))
}

async fn show(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<SessionState> {
    Ok(Json(store.session_state(&id)?))
}

async fn feedback(State(store): State<Arc<SessionStore>>, Path(id): Path<String>, body: Bytes) -> ApiResult<SessionState> {
    let req: FeedbackRequest = parse_body(&body)?;
    Ok(Json(store.submit_feedback(&id, req)?))
}

#[derive(Deserialize)]
struct PreviewQuery {
    value: f64,
}

async fn preview(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    q: Result<Query<PreviewQuery>, QueryRejection>,
) -> ApiResult<ScannerDisplay> {
    let Query(q) = q.map_err(|e| ApiError(SessionError::BadRequest(e.body_text())))?;
    Ok(Json(store.preview_feedback(&id, q.value)?))
}

async fn export(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<Vec<SessionLog>> {
    Ok(Json(store.export_session(&id)?))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/preview", get(preview))
        .route("/sessions/{id}/export", get(export))
        .with_state(store)
}

/// Bind `addr` and serve until the process is stopped.
pub async fn serve(store: Arc<SessionStore>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
