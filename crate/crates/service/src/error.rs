use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use trailscope_core::api::{ErrorBody, ErrorDetail};

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_argument", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn no_dataset() -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "unavailable", "no dataset loaded")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<trailscope_core::Error> for ApiError {
    fn from(err: trailscope_core::Error) -> Self {
        use trailscope_core::Error as E;
        match err {
            E::NotFound(m) => ApiError::not_found(m),
            E::InvalidArgument(m) => ApiError::invalid(m),
            E::FailedPrecondition(m) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "failed_precondition", m)
            }
            E::Json(e) => ApiError::invalid(e.to_string()),
            E::Io(e) => ApiError::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: ErrorDetail {
                code: self.code.to_string(),
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}
