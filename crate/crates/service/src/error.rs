use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

use seeded_laplacian::Error;

#[derive(Debug)]
pub enum ApiError {
    NotFound,
    Conflict(String),
    BadRequest(String),
    Unprocessable(String),
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn message(&self) -> &str {
        match self {
            ApiError::NotFound => "unknown session",
            ApiError::Conflict(m)
            | ApiError::BadRequest(m)
            | ApiError::Unprocessable(m)
            | ApiError::Internal(m) => m,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Annotation(_) | Error::Dimension { .. } | Error::DegenerateData(_) => ApiError::Unprocessable(m),
            Error::Decode { .. } | Error::InvalidParam(_) => ApiError::BadRequest(m),
            _ => ApiError::Internal(m),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.message() });
        (self.status(), Json(body)).into_response()
    }
}
