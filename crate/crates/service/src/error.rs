use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use firecover_core::Error as CoreError;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] CoreError),

    /// A derived product (such as the forecast) could not be built from the
    /// loaded data.
    #[error("not available: {0}")]
    Unavailable(String),

    #[error("job {0} not found")]
    JobNotFound(String),

    #[error("{0} not found")]
    NotFound(String),

    #[error("{0}")]
    Conflict(String),

    #[error("bad request: {0}")]
    BadRequest(String),
}

pub type ServiceResult<T> = Result<T, ServiceError>;

/// JSON error body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ErrorDetail {
    pub kind: String,
    pub message: String,
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::Core(e) => e.kind(),
            ServiceError::Unavailable(_) => "unavailable",
            ServiceError::JobNotFound(_) => "job_not_found",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::BadRequest(_) => "bad_request",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Core(CoreError::UnknownStation(_)) | ServiceError::JobNotFound(_) | ServiceError::NotFound(_) => {
                StatusCode::NOT_FOUND
            },
            ServiceError::Core(CoreError::Io(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            ServiceError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { error: ErrorDetail { kind: self.kind().to_string(), message: self.to_string() } }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
