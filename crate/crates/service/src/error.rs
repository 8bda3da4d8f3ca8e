use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use disc_core::Error;
use serde_json::json;

/// An error response: a status code and a JSON body `{"error": message}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(what: &str, id: u64) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no {what} with id {id}"))
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    pub fn too_large(n: usize, limit: usize) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, format!("{n} points exceed the limit of {limit}"))
    }

    pub fn busy(dataset: u64) -> Self {
        Self::new(StatusCode::CONFLICT, format!("dataset {dataset} is busy with another request"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = match &err {
            Error::InstanceTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            Error::Malformed(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::EmptyDataset
            | Error::DimensionMismatch { .. }
            | Error::KindMismatch { .. } => StatusCode::BAD_REQUEST,
            Error::VerificationFailed(_) | Error::Io(_) | Error::LeafHasWhite(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, err.to_string())
    }
}

impl From<std::io::Error> for ApiError {
    fn from(err: std::io::Error) -> Self {
        ApiError::internal(err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
