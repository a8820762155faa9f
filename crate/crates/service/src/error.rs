use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

/// Error body `{code, message, details}` with its status.
#[derive(Clone, Debug, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), details: Value::Null }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }
}

impl From<realign::Error> for ApiError {
    fn from(e: realign::Error) -> Self {
        use realign::Error as E;
        let message = e.to_string();
        match e {
            E::Infeasible(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "unsatisfiable", message),
            E::TooLarge { teams, limit } => Self::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", message)
                .with_details(json!({"teams": teams, "limit": limit})),
            E::UnknownTeam(team) => Self::bad_request(message).with_details(json!({"team": team})),
            E::Io { .. } => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
            _ => Self::bad_request(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"code": self.code, "message": self.message, "details": self.details});
        (self.status, Json(body)).into_response()
    }
}
