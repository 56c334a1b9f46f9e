use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use dqi_core::DqiError;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Error envelope returned by every endpoint and printed by the CLI under
/// `--json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ApiError {
    /// Stable machine-readable code.
    pub code: String,
    pub message: String,
    /// Structured context; `null` when there is none.
    #[serde(default)]
    pub detail: Value,
}

/// Whether a failure is the caller's fault or ours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    Internal,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError {
            code: code.to_string(),
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new("unknown_session", format!("no session with id `{id}`")).with_detail(json!({ "session_id": id }))
    }

    pub fn stale_snapshot(sent: &str, current: &str) -> Self {
        ApiError::new(
            "stale_snapshot",
            format!("request was computed against snapshot {sent}, the session is at {current}"),
        )
        .with_detail(json!({ "snapshot_id": sent, "current_snapshot": current }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new("internal", message)
    }

    pub fn class(&self) -> ErrorClass {
        match self.code.as_str() {
            "unknown_session" | "unknown_snapshot" | "not_found" => ErrorClass::NotFound,
            "stale_snapshot" => ErrorClass::Conflict,
            "internal" | "io" | "session_format" | "session_version" => ErrorClass::Internal,
            _ => ErrorClass::Validation,
        }
    }

    pub fn status(&self) -> StatusCode {
        match self.class() {
            ErrorClass::Validation => StatusCode::BAD_REQUEST,
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
            ErrorClass::Conflict => StatusCode::CONFLICT,
            ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl From<DqiError> for ApiError {
    fn from(e: DqiError) -> Self {
        let detail = match &e {
            DqiError::RaggedRow { row, expected, found } => json!({ "row": row, "expected": expected, "found": found }),
            DqiError::DuplicateColumn(c) | DqiError::UnknownColumn(c) | DqiError::AllMissing(c) | DqiError::LabelProtected(c) => {
                json!({ "column": c })
            }
            DqiError::IncompatibleColumn { column, .. } => json!({ "column": column }),
            DqiError::InvalidRule { index, .. } => json!({ "rule_index": index }),
            DqiError::NotEnoughDonors { k, donors } => json!({ "k": k, "donors": donors }),
            DqiError::SingularDesign { columns } => json!({ "columns": columns }),
            DqiError::StaleFlags { flagged, current } => json!({ "flagged": flagged, "current": current }),
            DqiError::NonFinite { row, feature } => json!({ "row": row, "feature": feature }),
            DqiError::RootMismatch { expected, found } => json!({ "expected": expected, "found": found }),
            DqiError::UnknownSnapshot(id) => json!({ "snapshot_id": id }),
            DqiError::SessionVersion { found, expected } => json!({ "found": found, "expected": expected }),
            _ => Value::Null,
        };
        ApiError {
            code: e.code().to_string(),
            message: e.to_string(),
            detail,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.class() == ErrorClass::Internal {
            tracing::error!(code = %self.code, "{}", self.message);
        }
        (self.status(), Json(self)).into_response()
    }
}
