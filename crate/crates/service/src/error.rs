use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error("unknown scene {0}")]
    UnknownScene(usize),
    #[error("no question is pending")]
    NoPendingQuestion,
    #[error("answer is for question {got} but question {pending} is pending")]
    StaleQuestion { got: u64, pending: u64 },
    #[error("{message}")]
    InvalidAnswer { kind: &'static str, message: String },
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("session {0} has not finished")]
    NotFinished(u64),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    /// Maps a rejected answer to its error kind.
    pub fn invalid_answer(e: aogqa::Error) -> Self {
        let kind = match e {
            aogqa::Error::AnswerMismatch(_) => "kind_mismatch",
            aogqa::Error::RegionOutsideScene => "out_of_bounds",
            aogqa::Error::DegenerateBox => "malformed_box",
            aogqa::Error::UnknownScene(_) => "unknown_scene",
            _ => "invalid_answer",
        };
        ApiError::InvalidAnswer {
            kind,
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::UnknownSession(_) => "unknown_session",
            ApiError::UnknownScene(_) => "unknown_scene",
            ApiError::NoPendingQuestion => "no_pending_question",
            ApiError::StaleQuestion { .. } => "stale_question",
            ApiError::InvalidAnswer { kind, .. } => kind,
            ApiError::BadConfig(_) => "bad_config",
            ApiError::NotFinished(_) => "not_finished",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession(_) | ApiError::UnknownScene(_) => StatusCode::NOT_FOUND,
            ApiError::NoPendingQuestion
            | ApiError::StaleQuestion { .. }
            | ApiError::NotFinished(_) => StatusCode::CONFLICT,
            ApiError::InvalidAnswer { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BadConfig(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            kind: self.kind().to_string(),
            message: self.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
