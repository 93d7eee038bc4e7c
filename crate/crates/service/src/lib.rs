//! JSON-over-HTTP sessions that run the learning loop with a live annotator or
//! the simulated one.
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | POST | `/sessions` | [`CreateSession`] | [`SessionCreated`] |
//! | GET | `/sessions/{id}/question` | | [`PendingQuestion`], or 204 when none is pending |
//! | POST | `/sessions/{id}/answer` | [`SubmitAnswer`] | [`Ack`] |
//! | GET | `/sessions/{id}/state` | | [`SessionState`] |
//! | GET | `/sessions/{id}/transcript` | | answered questions as [`TranscriptEntry`] list |
//! | GET | `/sessions/{id}/events` | | event log as JSON lines, once the session is done |
//! | GET | `/scenes/{id}` | | [`SceneDoc`] with the full feature grid |
//!
//! Errors carry an [`ErrorBody`] with a machine-readable `kind`.

pub mod api;
pub mod client;
pub mod error;
pub mod render;
pub mod session;

pub use api::{router, serve, spawn, Service};
pub use client::{Client, ClientError};
pub use error::{ApiError, ErrorBody};
pub use render::{RenderPayload, ScenePreview, SUMMARY_FACTOR};
pub use session::{
    Ack, CreateSession, LearnerSummary, Mode, PendingQuestion, PoseSummary, SceneDoc,
    SessionCreated, SessionState, Status, SubmitAnswer, TranscriptEntry,
};
