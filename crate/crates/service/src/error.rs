use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cgm_core::model::{ErrorCode, ModelError};
use cgm_core::reasoner::ReasonError;
use cgm_core::{EncodeError, LoadError, ParseError, ValidationReport};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

/// Error body: `{"code", "message", ...payload}`.
#[derive(Debug, Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub payload: Option<(&'static str, Value)>,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), payload: None }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("no {what} with id `{id}`"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    fn with(mut self, key: &'static str, value: impl Serialize) -> Self {
        self.payload = Some((key, serde_json::to_value(value).expect("serializable")));
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = serde_json::to_value(Body { code: self.code, message: &self.message }).expect("serializable");
        if let Some((k, v)) = self.payload {
            body[k] = v;
        }
        (self.status, Json(body)).into_response()
    }
}

#[derive(Serialize)]
struct SpanError<'a> {
    line: u32,
    col: u32,
    message: &'a str,
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Parse(errs) => {
                let msgs: Vec<String> = errs.iter().map(ParseError::to_string).collect();
                let spans: Vec<SpanError> = errs
                    .iter()
                    .zip(&msgs)
                    .map(|(e, m)| SpanError { line: e.span.line, col: e.span.col, message: m })
                    .collect();
                let err = ApiError::new(StatusCode::BAD_REQUEST, "ParseError", msgs[0].clone());
                err.with("errors", spans)
            }
            LoadError::Invalid(report) => report.into(),
        }
    }
}

impl From<ValidationReport> for ApiError {
    fn from(report: ValidationReport) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "ValidationError", report.to_string()).with("report", report)
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        match e.code() {
            ErrorCode::KindMismatch => ApiError::new(StatusCode::CONFLICT, "KindMismatch", e.to_string()),
            _ => ApiError::new(StatusCode::NOT_FOUND, "UnknownReference", e.to_string()),
        }
    }
}

impl From<EncodeError> for ApiError {
    fn from(e: EncodeError) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "EncodeError", e.to_string())
    }
}

impl From<ReasonError> for ApiError {
    fn from(e: ReasonError) -> Self {
        match e {
            ReasonError::Encode(e) => e.into(),
            ReasonError::Model(e) => e.into(),
            ReasonError::StaleRealization(v) => {
                ApiError::new(StatusCode::BAD_REQUEST, "StaleRealization", "previous realization is invalid").with("violations", v)
            }
        }
    }
}
