use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("{0}")]
    InvalidRequest(String),
    #[error("no session {0}")]
    NotFound(String),
    #[error("question {expected} is outstanding (got a choice for {got})")]
    StaleQuestion { expected: u32, got: u32 },
    #[error("session is complete")]
    SessionComplete,
    #[error("session incomplete: {remaining} question(s) unanswered")]
    Incomplete { remaining: usize },
    #[error("commitment digest does not match the revealed seed")]
    Integrity,
    #[error("event log unavailable: {0}")]
    Storage(String),
}

impl ServiceError {
    pub(crate) fn storage(e: std::io::Error) -> Self {
        ServiceError::Storage(e.to_string())
    }

    /// Machine-readable code carried in the error body.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::InvalidRequest(_) => "invalid_request",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::StaleQuestion { .. } => "stale_question",
            ServiceError::SessionComplete => "session_complete",
            ServiceError::Incomplete { .. } => "session_incomplete",
            ServiceError::Integrity => "integrity_error",
            ServiceError::Storage(_) => "storage_error",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::StaleQuestion { .. } | ServiceError::SessionComplete | ServiceError::Incomplete { .. } => {
                StatusCode::CONFLICT
            }
            ServiceError::Integrity | ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// `{"error": {"code": ..., "message": ...}}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: ErrorDetail { code: self.code().into(), message: self.to_string() } };
        (self.status(), Json(body)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conflicts_map_to_409() {
        for e in [
            ServiceError::StaleQuestion { expected: 1, got: 0 },
            ServiceError::SessionComplete,
            ServiceError::Incomplete { remaining: 2 },
        ] {
            assert_eq!(e.status(), StatusCode::CONFLICT);
        }
        assert_eq!(ServiceError::NotFound("x".into()).status(), StatusCode::NOT_FOUND);
        assert_eq!(ServiceError::Integrity.code(), "integrity_error");
    }
}
