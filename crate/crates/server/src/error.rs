// SPDX-License-Identifier: Apache-2.0

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use pvil_core::CoreError;
use pvil_session::SessionError;

/// An error answered as `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, ApiError>;

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn body(&self) -> serde_json::Value {
        json!({"error": {"code": self.code, "message": self.message}})
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.status.as_u16(), self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(_) => ApiError::internal(e.to_string()),
            _ => ApiError::invalid(e.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::Core(c) => c.into(),
            SessionError::Finished => ApiError::conflict("finished", msg),
            SessionError::NotFinished => ApiError::conflict("not_finished", msg),
            SessionError::AtRoot => ApiError::conflict("at_root", msg),
            SessionError::InvalidPolygon(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_polygon", msg),
            SessionError::EmptySelection(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_selection", msg),
            SessionError::InvalidParameter(_) | SessionError::SubsetTooSmall { .. } | SessionError::SeedImmutable { .. } => {
                ApiError::invalid(msg)
            }
            SessionError::ReplayMismatch { .. } | SessionError::EventLog(_) => ApiError::internal(msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{self}");
        }
        (self.status, Json(self.body())).into_response()
    }
}
