//! HTTP routes over [`ServiceState`].
//!
//! | route | result |
//! |---|---|
//! | `GET /v1/health` | `{"status", "generation"}` |
//! | `GET /v1/reasons` | accepted rejection reasons |
//! | `GET /v1/recommendations/{article}` | [`BatchView`], 404 for an unknown article |
//! | `GET /v1/tasks?min_links=N` | [`Task`] list, most recommendations first |
//! | `POST /v1/feedback` | 201 `{"id"}`, 400 `{"error", "field"}` |
//! | `POST /v1/edits` | [`EditOutcome`], 409 when the batch is stale |

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::feedback::{FeedbackSubmission, ValidationError};
use crate::state::{BatchView, EditOutcome, EditRequest, ServiceError, ServiceState, Task};

pub const DEFAULT_MIN_LINKS: usize = 5;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<ValidationError> for ApiError {
    fn from(e: ValidationError) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, field) = match &self.0 {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, None),
            ServiceError::Validation(v) => (StatusCode::BAD_REQUEST, Some(v.field.clone())),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, None),
            ServiceError::Log(_) | ServiceError::Io(_) => {
                tracing::error!("{}", self.0);
                (StatusCode::INTERNAL_SERVER_ERROR, None)
            }
        };
        let body = ErrorBody {
            error: self.0.to_string(),
            field,
        };
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<ServiceState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/reasons", get(reasons))
        .route("/v1/recommendations/{article}", get(recommendations))
        .route("/v1/tasks", get(tasks))
        .route("/v1/feedback", post(feedback))
        .route("/v1/edits", post(edits))
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::Io(std::io::Error::other(e))))?
        .map_err(ApiError)
}

fn parse_body(body: &Bytes) -> Result<Value, ValidationError> {
    serde_json::from_slice(body).map_err(|e| ValidationError::new("body", e.to_string()))
}

async fn health(State(state): State<Shared>) -> Result<Json<Value>, ApiError> {
    let set = blocking(move || state.batch_set()).await?;
    Ok(Json(
        json!({ "status": "ok", "generation": set.generation }),
    ))
}

async fn reasons(State(state): State<Shared>) -> Json<Vec<String>> {
    Json(state.config().rejection_reasons.clone())
}

async fn recommendations(
    State(state): State<Shared>,
    Path(article): Path<String>,
) -> Result<Json<BatchView>, ApiError> {
    Ok(Json(
        blocking(move || state.recommendations(&article)).await?,
    ))
}

#[derive(Debug, Deserialize)]
pub struct TaskQuery {
    pub min_links: Option<usize>,
}

async fn tasks(
    State(state): State<Shared>,
    Query(q): Query<TaskQuery>,
) -> Result<Json<Vec<Task>>, ApiError> {
    let min = q.min_links.unwrap_or(DEFAULT_MIN_LINKS);
    Ok(Json(blocking(move || state.tasks(min)).await?))
}

async fn feedback(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let value = parse_body(&body)?;
    let submission = FeedbackSubmission::from_json(&value, &state.config().rejection_reasons)?;
    let event = blocking(move || state.post_feedback(submission)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": event.id }))).into_response())
}

async fn edits(State(state): State<Shared>, body: Bytes) -> Result<Json<EditOutcome>, ApiError> {
    let value = parse_body(&body)?;
    let request: EditRequest = serde_json::from_value(value).map_err(|e| {
        let field = if e.to_string().contains("article") {
            "article"
        } else {
            "accepted"
        };
        ValidationError::new(field, e.to_string())
    })?;
    Ok(Json(blocking(move || state.submit_edit(request)).await?))
}
