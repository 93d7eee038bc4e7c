//! Blocking client for scripted annotators and the command line.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Response;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;

use aogqa::world::{Answer, Question};

use crate::error::ErrorBody;
use crate::session::{
    Ack, CreateSession, PendingQuestion, SceneDoc, SessionCreated, SessionState, Status,
    SubmitAnswer, TranscriptEntry,
};

/// Pause between polls while the loop is computing.
pub const POLL_INTERVAL: Duration = Duration::from_millis(5);

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Http(#[from] reqwest::Error),
    #[error("{status}: {} ({})", body.message, body.kind)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("session failed: {0}")]
    Failed(String),
    #[error("answering failed: {0}")]
    Answer(String),
}

pub type Result<T> = std::result::Result<T, ClientError>;

pub struct Client {
    base: String,
    http: reqwest::blocking::Client,
}

fn decode<T: DeserializeOwned>(r: Response) -> Result<T> {
    let status = r.status();
    if status.is_success() {
        return Ok(r.json()?);
    }
    let body = r.json::<ErrorBody>().unwrap_or_else(|e| ErrorBody {
        kind: "unknown".into(),
        message: e.to_string(),
    });
    Err(ClientError::Api { status, body })
}

impl Client {
    pub fn new(base: &str) -> Self {
        Client {
            base: base.trim_end_matches('/').to_string(),
            http: reqwest::blocking::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<SessionCreated> {
        decode(self.http.post(self.url("/sessions")).json(req).send()?)
    }

    /// `None` when no question is pending.
    pub fn question(&self, id: u64) -> Result<Option<PendingQuestion>> {
        let r = self
            .http
            .get(self.url(&format!("/sessions/{id}/question")))
            .send()?;
        if r.status() == StatusCode::NO_CONTENT {
            return Ok(None);
        }
        decode(r).map(Some)
    }

    pub fn answer(&self, id: u64, question_id: u64, answer: Answer) -> Result<Ack> {
        let body = SubmitAnswer {
            question_id,
            answer,
        };
        decode(
            self.http
                .post(self.url(&format!("/sessions/{id}/answer")))
                .json(&body)
                .send()?,
        )
    }

    pub fn state(&self, id: u64) -> Result<SessionState> {
        decode(
            self.http
                .get(self.url(&format!("/sessions/{id}/state")))
                .send()?,
        )
    }

    pub fn transcript(&self, id: u64) -> Result<Vec<TranscriptEntry>> {
        decode(
            self.http
                .get(self.url(&format!("/sessions/{id}/transcript")))
                .send()?,
        )
    }

    /// The event log as JSON lines.
    pub fn events(&self, id: u64) -> Result<String> {
        let r = self
            .http
            .get(self.url(&format!("/sessions/{id}/events")))
            .send()?;
        if !r.status().is_success() {
            return decode(r);
        }
        Ok(r.text()?)
    }

    pub fn scene(&self, id: usize) -> Result<SceneDoc> {
        decode(self.http.get(self.url(&format!("/scenes/{id}"))).send()?)
    }

    /// Answers every question with `respond` until the session finishes.
    pub fn drive(
        &self,
        id: u64,
        mut respond: impl FnMut(&Question) -> std::result::Result<Answer, String>,
    ) -> Result<SessionState> {
        loop {
            if let Some(p) = self.question(id)? {
                let a = respond(&p.question).map_err(ClientError::Answer)?;
                self.answer(id, p.question_id, a)?;
                continue;
            }
            let s = self.state(id)?;
            match s.status {
                Status::Done => return Ok(s),
                Status::Failed => return Err(ClientError::Failed(s.error.unwrap_or_default())),
                Status::Running | Status::AwaitingAnswer => thread::sleep(POLL_INTERVAL),
            }
        }
    }

    /// Polls until the session finishes.
    pub fn wait(&self, id: u64, interval: Duration) -> Result<SessionState> {
        loop {
            let s = self.state(id)?;
            match s.status {
                Status::Done => return Ok(s),
                Status::Failed => return Err(ClientError::Failed(s.error.unwrap_or_default())),
                _ => thread::sleep(interval),
            }
        }
    }
}
