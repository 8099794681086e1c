use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use codesign_core::Error;
use serde_json::{json, Value};

use crate::stable::Stable;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        use StatusCode as S;
        let message = err.to_string();
        match &err {
            Error::Cycle { path } => {
                ApiError::new(S::CONFLICT, "cycle", message).with_detail(json!({ "path": path }))
            }
            Error::SingularDesign { child, parents } => ApiError::new(S::UNPROCESSABLE_ENTITY, "singular_design", message)
                .with_detail(json!({ "node": child, "parents": parents })),
            Error::DegenerateColumn(c) => ApiError::new(S::UNPROCESSABLE_ENTITY, "degenerate_column", message)
                .with_detail(json!({ "node": c })),
            Error::InsufficientRows { needed, got } => ApiError::new(S::UNPROCESSABLE_ENTITY, "insufficient_rows", message)
                .with_detail(json!({ "needed": needed, "got": got })),
            Error::SingularSampleCov | Error::SingularInducedCov | Error::VersionMismatch { .. } => {
                ApiError::new(S::UNPROCESSABLE_ENTITY, "fit_failed", message)
            }
            Error::UnknownIteration(k) => {
                ApiError::new(S::NOT_FOUND, "unknown_iteration", message).with_detail(json!({ "index": k }))
            }
            Error::Io(_) | Error::History(_) => ApiError::internal(message),
            _ => ApiError::bad_request(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.code, self.message);
        }
        let body = json!({
            "error": { "code": self.code, "message": self.message, "detail": self.detail }
        });
        Stable(self.status, body).into_response()
    }
}
