use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown avatar {0:?}")]
    UnknownAvatar(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} was closed or expired")]
    SessionGone(String),
    #[error("session limit of {0} reached")]
    Capacity(usize),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("internal: {0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] posemap_core::Error),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use posemap_core::Error as E;
        match self {
            ServiceError::UnknownAvatar(_) | ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::SessionGone(_) => StatusCode::GONE,
            ServiceError::Capacity(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Config(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ServiceError::Core(E::OutOfRange(_) | E::NonFinite(_) | E::Degenerate(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Core(E::InvalidArgument(_) | E::UnknownAction(_)) => StatusCode::BAD_REQUEST,
            ServiceError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownAvatar(_) => "unknown_avatar",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::SessionGone(_) => "session_gone",
            ServiceError::Capacity(_) => "capacity",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Config(_) => "config",
            ServiceError::Internal(_) => "internal",
            ServiceError::Core(_) => "step_failed",
        }
    }

    pub fn body(&self) -> serde_json::Value {
        serde_json::json!({ "error": self.code(), "message": self.to_string() })
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
