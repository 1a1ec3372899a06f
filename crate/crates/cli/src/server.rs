//! HTTP JSON API over a [`Service`].
//!
//! | method | path | body / response |
//! |---|---|---|
//! | GET | `/api/capabilities` | polymers, models, default seed |
//! | GET | `/api/range/{polymer}` | observed min/max per parameter |
//! | POST | `/api/runs` | `RunRequest` → `{run_id}` |
//! | GET | `/api/runs/{id}/status` | `RunStatus` |
//! | GET | `/api/runs/{id}/result` | `RunArtifacts` |
//! | GET | `/api/runs/{id}/report` | zip bundle |
//! | POST | `/api/compare` | `{a, b}` → `DistComparison` with flat rows |
//! | POST | `/api/admin/reload` | `{path}` (optional) → capabilities |
//!
//! Every error response is `{"code": ..., "message": ...}`.

use std::path::PathBuf;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use spindle_core::distribution::{compare_distributions, ComparisonRow};
use spindle_core::service::{Capabilities, RunState, RunStatus};
use spindle_core::{DistComparison, RangeSummary, RunRequest, Service};

use crate::data;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    pub status: StatusCode,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { code: code.to_string(), message: message.into(), status }
    }

    fn unknown_run(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_run", format!("no run with id '{id}'"))
    }
}

impl From<spindle_core::Error> for ApiError {
    fn from(e: spindle_core::Error) -> Self {
        let code = e.code();
        let status = match code {
            "unknown_polymer" => StatusCode::NOT_FOUND,
            "invalid_input" | "missing_columns" | "missing_feature" | "empty_sample" | "sample_size" | "zero_variance" | "csv_error" | "io_error" => {
                StatusCode::BAD_REQUEST
            }
            "insufficient_studies" | "all_zero_variance" | "non_convergence" => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Core(e) => e.into(),
            other => ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submitted {
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub comparison: DistComparison,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReloadRequest {
    /// Dataset file on the server; the synthetic dataset when absent.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/api/capabilities", get(capabilities))
        .route("/api/range/{polymer}", get(range))
        .route("/api/runs", post(submit))
        .route("/api/runs/{id}/status", get(status))
        .route("/api/runs/{id}/result", get(result))
        .route("/api/runs/{id}/report", get(report))
        .route("/api/compare", post(compare))
        .route("/api/admin/reload", post(reload))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(service)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn capabilities(State(service): State<Service>) -> Json<Capabilities> {
    Json(service.capabilities())
}

async fn range(State(service): State<Service>, Path(polymer): Path<String>) -> ApiResult<Json<RangeSummary>> {
    Ok(Json(service.range(&polymer)?))
}

async fn submit(State(service): State<Service>, body: Result<Json<RunRequest>, JsonRejection>) -> ApiResult<(StatusCode, Json<Submitted>)> {
    let Json(request) = body?;
    let dataset = service.dataset();
    if !dataset.records.iter().any(|r| r.polymer == request.polymer) {
        return Err(spindle_core::Error::UnknownPolymer {
            name: request.polymer,
            available: spindle_core::dataset::polymers(&dataset.records),
        }
        .into());
    }
    let run_id = service.submit(request)?;
    Ok((StatusCode::ACCEPTED, Json(Submitted { run_id })))
}

async fn status(State(service): State<Service>, Path(id): Path<String>) -> ApiResult<Json<RunStatus>> {
    service.status(&id).map(Json).ok_or_else(|| ApiError::unknown_run(&id))
}

/// The status of a run that has no result yet, as an error.
fn not_ready(status: RunStatus) -> ApiError {
    match status.state {
        RunState::Failed => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            status.error_code.as_deref().unwrap_or("run_failed"),
            status.message,
        ),
        _ => ApiError::new(StatusCode::CONFLICT, "not_ready", status.message),
    }
}

async fn result(State(service): State<Service>, Path(id): Path<String>) -> ApiResult<Response> {
    blocking(move || {
        if let Some(a) = service.result(&id) {
            let body = serde_json::to_vec(&*a).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "serialization_error", e.to_string()))?;
            return Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response());
        }
        Err(service.status(&id).map_or_else(|| ApiError::unknown_run(&id), not_ready))
    })
    .await
}

async fn report(State(service): State<Service>, Path(id): Path<String>) -> ApiResult<Response> {
    blocking(move || match service.report(&id) {
        Some(zip) => {
            let bytes = zip?;
            let disposition = format!("attachment; filename=\"spindle-{id}.zip\"");
            Ok(([(header::CONTENT_TYPE, "application/zip".to_string()), (header::CONTENT_DISPOSITION, disposition)], bytes).into_response())
        }
        None => Err(service.status(&id).map_or_else(|| ApiError::unknown_run(&id), not_ready)),
    })
    .await
}

async fn compare(body: Result<Json<CompareRequest>, JsonRejection>) -> ApiResult<Json<CompareResponse>> {
    let Json(req) = body?;
    blocking(move || {
        let comparison = compare_distributions(&req.a, &req.b)?;
        Ok(Json(CompareResponse { rows: comparison.rows(), comparison }))
    })
    .await
}

async fn reload(State(service): State<Service>, body: Option<Json<ReloadRequest>>) -> ApiResult<Json<Capabilities>> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    blocking(move || {
        let dataset = data::load(req.path.as_deref())?;
        log::info!("reloaded dataset {} ({})", dataset.name, &dataset.fingerprint[..12]);
        service.reload(dataset);
        Ok(Json(service.capabilities()))
    })
    .await
}
