//! HTTP service over the session store.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use sqlclarify_core::gateway::GatewayError;
use sqlclarify_core::orchestrator::session::{SessionStore, SessionView};
use sqlclarify_core::orchestrator::{EncodeRequest, EncodeResponse, OrchestratorError, Pipeline};
use sqlclarify_core::question_gen::Answer;
use sqlclarify_core::schema::DatabaseSchema;

pub struct AppState {
    pub pipeline: Pipeline,
    pub store: SessionStore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub question: String,
    pub db_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitAnswer {
    pub question_ref: usize,
    pub option_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code: code.into(), message: message.into() } }
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        use OrchestratorError as E;
        let (status, code) = match &e {
            E::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            E::Gateway(GatewayError::UnknownDb(_)) => (StatusCode::NOT_FOUND, "unknown_db"),
            E::Gateway(GatewayError::Timeout(_)) => (StatusCode::GATEWAY_TIMEOUT, "parser_timeout"),
            E::Gateway(GatewayError::InvalidSql { .. }) => (StatusCode::BAD_GATEWAY, "invalid_sql"),
            E::Gateway(_) => (StatusCode::BAD_GATEWAY, "parser_error"),
            E::Unrestatable { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "unrestatable_sql"),
            E::Finalized(_) => (StatusCode::CONFLICT, "session_finalized"),
            E::WrongQuestion { .. } => (StatusCode::BAD_REQUEST, "wrong_question"),
            E::BadOption { .. } => (StatusCode::BAD_REQUEST, "bad_option"),
            E::Encoder(_) => (StatusCode::BAD_REQUEST, "encoder_error"),
            E::ExternalEncoder(_) => (StatusCode::BAD_GATEWAY, "encoder_error"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(e.status(), "bad_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Shared = Arc<AppState>;

/// Pipeline calls can block on parser subprocesses or remote services.
async fn blocking<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, OrchestratorError> + Send + 'static,
{
    let state = Arc::clone(state);
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn create_session(State(state): State<Shared>, body: Result<Json<CreateSession>, JsonRejection>) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let view = blocking(&state, move |s| {
        let session = s.store.create(&s.pipeline, &req.db_id, &req.question)?;
        Ok(SessionView::from(&session))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = state.store.get(&id)?;
    Ok(Json(SessionView::from(&session)))
}

async fn answer(State(state): State<Shared>, Path(id): Path<String>, body: Result<Json<SubmitAnswer>, JsonRejection>) -> Result<Json<SessionView>, ApiError> {
    let Json(req) = body?;
    let view = blocking(&state, move |s| {
        let answer = Answer { question: req.question_ref, option: req.option_index };
        let session = s.store.answer(&s.pipeline, &id, answer)?;
        Ok(SessionView::from(&session))
    })
    .await?;
    Ok(Json(view))
}

async fn schemas(State(state): State<Shared>) -> Json<Vec<DatabaseSchema>> {
    Json(state.pipeline.gateway.schemas().cloned().collect())
}

async fn encode(State(state): State<Shared>, body: Result<Json<EncodeRequest>, JsonRejection>) -> Result<Json<EncodeResponse>, ApiError> {
    let Json(req) = body?;
    let resp = blocking(&state, move |s| {
        let (q, r) = s.pipeline.artifacts.encoder.encode_pair(&req.question_tokens, &req.restated_tokens)?;
        Ok(EncodeResponse::from_encoded(&q, &r))
    })
    .await?;
    Ok(Json(resp))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

/// Routes of the service; `assets` is served for every other path when set.
pub fn router(state: Shared, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/answers", post(answer))
        .route("/schemas", get(schemas))
        .route("/encode", post(encode));
    let api = match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    api.with_state(state)
}
