use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use bodyprompt_core::session::Phase;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{message}")]
    Conflict { phase: Phase, message: String },
    #[error("{0}")]
    BadRequest(String),
    #[error("invalid or missing signature")]
    Unauthorized,
    #[error("no pose found; {retries_left} retries left")]
    NoPoseFound { retries_left: u8 },
    #[error("{0}")]
    BadGateway(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, body) = match self {
            ApiError::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "error": message })),
            ApiError::Conflict { phase, .. } => (StatusCode::CONFLICT, json!({ "error": message, "phase": phase })),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, json!({ "error": message })),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, json!({ "error": message })),
            ApiError::NoPoseFound { retries_left } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "no_pose_found", "message": message, "retries_left": retries_left }),
            ),
            ApiError::BadGateway(_) => (StatusCode::BAD_GATEWAY, json!({ "error": message })),
            ApiError::Unavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, json!({ "error": message })),
            ApiError::Internal(_) => {
                log::error!("internal error: {message}");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": message }))
            }
        };
        (status, Json(body)).into_response()
    }
}
