//! JSON-over-HTTP transport for [`ChatEngine`].
//!
//! | route | body | response |
//! |---|---|---|
//! | `POST /session` | – | `{session_id, task_card}` |
//! | `POST /session/{id}/turn` | `{text}` | `{utterance, acts, status}` |
//! | `POST /session/{id}/end` | – | `{session_id, status, turns, completion_code}` |
//! | `POST /session/{id}/questionnaire` | `{q1..q6}` | `{session_id, stored}` |
//! | `GET /health` | – | `{status, policies}` |
//!
//! Failures carry `{error, detail}` with a 400, 404, 409 or 422 status.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use super::engine::{ChatEngine, Questionnaire, SessionStatus, TurnResponse};
use crate::error::Error;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

pub struct ApiError(StatusCode, ErrorBody);

impl ApiError {
    fn bad_request(detail: impl ToString) -> Self {
        Self(
            StatusCode::BAD_REQUEST,
            ErrorBody {
                error: "bad_request".into(),
                detail: detail.to_string(),
            },
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            Error::SessionEnded(_) => (StatusCode::CONFLICT, "session_ended"),
            Error::SessionLive(_) => (StatusCode::CONFLICT, "session_live"),
            Error::AlreadySubmitted(_) => (StatusCode::CONFLICT, "already_submitted"),
            Error::Questionnaire(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_questionnaire"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self(
            status,
            ErrorBody {
                error: code.into(),
                detail: e.to_string(),
            },
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body ourselves so malformed input gets the `{error, detail}`
/// shape instead of the framework's plain-text rejection.
fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(ApiError::bad_request)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedBody {
    pub session_id: String,
    pub task_card: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TurnRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EndBody {
    pub session_id: String,
    pub status: SessionStatus,
    pub turns: usize,
    /// Shown to the user once they hang up, to prove completion.
    pub completion_code: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StoredBody {
    pub session_id: String,
    pub stored: bool,
}

pub fn router(engine: Arc<ChatEngine>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/session", post(create))
        .route("/session/{id}/turn", post(turn))
        .route("/session/{id}/end", post(end))
        .route("/session/{id}/questionnaire", post(questionnaire))
        .layer(CorsLayer::permissive())
        .with_state(engine)
}

async fn health(State(engine): State<Arc<ChatEngine>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "policies": engine.pool().len() }))
}

async fn create(State(engine): State<Arc<ChatEngine>>) -> ApiResult<(StatusCode, Json<CreatedBody>)> {
    let created = engine.create_session()?;
    Ok((
        StatusCode::CREATED,
        Json(CreatedBody {
            session_id: created.session_id,
            task_card: created.task_card,
        }),
    ))
}

async fn turn(State(engine): State<Arc<ChatEngine>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<TurnResponse>> {
    let req: TurnRequest = parse(&body)?;
    Ok(Json(engine.post_turn(&id, &req.text)?))
}

async fn end(State(engine): State<Arc<ChatEngine>>, Path(id): Path<String>) -> ApiResult<Json<EndBody>> {
    let s = engine.end_session(&id)?;
    Ok(Json(EndBody {
        completion_code: format!("MDIM-{}", s.id[..8.min(s.id.len())].to_uppercase()),
        session_id: s.id.clone(),
        status: s.status,
        turns: s.turns(),
    }))
}

async fn questionnaire(
    State(engine): State<Arc<ChatEngine>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<StoredBody>)> {
    let answers: Questionnaire = parse(&body)?;
    let record = engine.submit_questionnaire(&id, answers)?;
    Ok((
        StatusCode::CREATED,
        Json(StoredBody {
            session_id: record.session_id,
            stored: true,
        }),
    ))
}

/// Serves until ctrl-c.
pub async fn serve(engine: Arc<ChatEngine>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("chat service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
