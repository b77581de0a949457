use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use refspect_core::reference::NormalizerError;
use refspect_core::spectrum::SpectrumError;

/// JSON error body: `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                detail: Value::Null,
            },
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.body.detail = detail;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn stale(seen: u64, current: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "stale",
            format!("session changed since counter {seen}; refetch and retry"),
        )
        .with_detail(serde_json::json!({ "seen": seen, "current": current }))
    }
}

impl From<NormalizerError> for ApiError {
    fn from(e: NormalizerError) -> Self {
        let message = e.to_string();
        match e {
            NormalizerError::UnknownCluster(id) => {
                Self::new(StatusCode::NOT_FOUND, "unknown_cluster", message).with_detail(serde_json::json!({ "id": id }))
            }
            NormalizerError::SplitCluster { id, parts } => Self::new(StatusCode::CONFLICT, "split_cluster", message)
                .with_detail(serde_json::json!({ "id": id, "parts": parts })),
            NormalizerError::EmptyMerge | NormalizerError::InvalidPartition(_) | NormalizerError::YearOutOfRange(_) => {
                Self::bad_request(message)
            }
            NormalizerError::Replay { .. } | NormalizerError::LedgerFormat { .. } => Self::internal(message),
        }
    }
}

impl From<SpectrumError> for ApiError {
    fn from(e: SpectrumError) -> Self {
        match e {
            SpectrumError::Cluster(inner) => inner.into(),
            other => Self::bad_request(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(e.status(), "bad_request", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::new(e.status(), "bad_request", e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        Self::new(e.status(), "bad_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
