//! One learning loop per session, run on its own thread.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use aogqa::features::FeatureGrid;
use aogqa::qa::{
    run_learning_loop_observed, AnswerSource, GainRecord, Learner, LearnerConfig, Losses,
};
use aogqa::world::{Answer, Oracle, Question, World};

use crate::error::ApiError;
use crate::render::{render, RenderPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The simulated annotator answers inside the loop.
    Oracle,
    /// Questions wait for answers posted over HTTP.
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub mode: Mode,
    /// Learner configuration; the default when absent.
    #[serde(default)]
    pub config: Option<LearnerConfig>,
    /// Overrides `config.iterations`.
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Error rate of the simulated annotator; the world's when absent.
    #[serde(default)]
    pub oracle_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: u64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuestion {
    pub question_id: u64,
    pub question: Question,
    pub render: RenderPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitAnswer {
    pub question_id: u64,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub question_id: u64,
    pub question: Question,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSummary {
    pub category: usize,
    pub name: String,
    pub parts: usize,
    pub positives: usize,
    pub labeled: usize,
    pub boxes_requested: usize,
}

/// Learner state as of the last completed storyline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnerSummary {
    pub storylines: usize,
    pub cost: f64,
    pub risk: f64,
    pub losses: Vec<Losses>,
    pub probabilities: Vec<f64>,
    pub poses: Vec<PoseSummary>,
    pub records: Vec<GainRecord>,
}

impl LearnerSummary {
    pub fn of(l: &Learner) -> Self {
        LearnerSummary {
            storylines: l.storylines_run(),
            cost: l.ledger.cost,
            risk: l.ledger.risk(&l.config().cost),
            losses: l.ledger.losses.clone(),
            probabilities: l.ledger.probabilities.clone(),
            poses: l
                .poses
                .iter()
                .zip(&l.aog.poses)
                .map(|(r, p)| PoseSummary {
                    category: r.category,
                    name: p.name.clone(),
                    parts: p.parts.len(),
                    positives: r.positives.len(),
                    labeled: r.labels.len(),
                    boxes_requested: r.boxes_requested,
                })
                .collect(),
            records: l.ledger.records.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    AwaitingAnswer,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: u64,
    pub mode: Mode,
    pub status: Status,
    pub error: Option<String>,
    pub answered: usize,
    pub learner: LearnerSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub question_id: u64,
    pub answered: usize,
    pub learner: LearnerSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDoc {
    pub id: usize,
    pub keyword: usize,
    pub grid: FeatureGrid,
}

enum Outcome {
    Done { events: String },
    Failed(String),
}

struct Inner {
    pending: Option<PendingQuestion>,
    answers: Option<Sender<Answer>>,
    transcript: Vec<TranscriptEntry>,
    learner: Arc<LearnerSummary>,
    outcome: Option<Outcome>,
    next_question: u64,
}

pub struct Session {
    pub id: u64,
    pub mode: Mode,
    world: Arc<World>,
    inner: Mutex<Inner>,
}

/// Blocks the loop until the pending question is answered over HTTP.
struct LiveSource {
    session: Arc<Session>,
    answers: Receiver<Answer>,
}

impl AnswerSource for LiveSource {
    fn answer(&mut self, q: &Question) -> aogqa::Result<Answer> {
        let render = render(&self.session.world, q)?;
        {
            let mut inner = self.session.lock();
            let question_id = inner.next_question;
            inner.next_question += 1;
            inner.pending = Some(PendingQuestion {
                question_id,
                question: q.clone(),
                render,
            });
        }
        self.answers.recv().map_err(|_| {
            aogqa::Error::AnswerUnavailable(format!("session {} closed", self.session.id))
        })
    }
}

impl Session {
    /// Creates the session and starts its loop.
    pub fn start(id: u64, world: Arc<World>, req: CreateSession) -> Result<Arc<Session>, ApiError> {
        let mut cfg = req.config.unwrap_or_default();
        if let Some(n) = req.iterations {
            cfg.iterations = n;
        }
        cfg.validate()
            .map_err(|e| ApiError::BadConfig(e.to_string()))?;
        let epsilon = req.oracle_error.unwrap_or(world.config.oracle_error);
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ApiError::BadConfig(format!(
                "oracle error {epsilon} outside [0, 1]"
            )));
        }
        let (tx, rx) = channel();
        let session = Arc::new(Session {
            id,
            mode: req.mode,
            world: world.clone(),
            inner: Mutex::new(Inner {
                pending: None,
                answers: (req.mode == Mode::Live).then_some(tx),
                transcript: Vec::new(),
                learner: Arc::new(LearnerSummary::default()),
                outcome: None,
                next_question: 0,
            }),
        });
        let worker = session.clone();
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || {
                let mut src: Box<dyn AnswerSource> = match worker.mode {
                    Mode::Oracle => Box::new(Oracle::new(world.clone(), epsilon)),
                    Mode::Live => Box::new(LiveSource {
                        session: worker.clone(),
                        answers: rx,
                    }),
                };
                let publish =
                    &mut |l: &Learner| worker.lock().learner = Arc::new(LearnerSummary::of(l));
                let result = run_learning_loop_observed(world, cfg, src.as_mut(), publish);
                let outcome = match result.and_then(|l| l.log.to_jsonl()) {
                    Ok(events) => {
                        info!("session {} finished", worker.id);
                        Outcome::Done { events }
                    }
                    Err(e) => {
                        warn!("session {} failed: {e}", worker.id);
                        Outcome::Failed(e.to_string())
                    }
                };
                let mut inner = worker.lock();
                inner.pending = None;
                inner.answers = None;
                inner.outcome = Some(outcome);
            })
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(session)
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn question(&self) -> Option<PendingQuestion> {
        self.lock().pending.clone()
    }

    /// Validates `a` against the pending question, records it and unblocks the loop.
    pub fn submit(&self, a: SubmitAnswer) -> Result<Ack, ApiError> {
        let mut inner = self.lock();
        let pending = inner.pending.as_ref().ok_or(ApiError::NoPendingQuestion)?;
        if pending.question_id != a.question_id {
            return Err(ApiError::StaleQuestion {
                got: a.question_id,
                pending: pending.question_id,
            });
        }
        a.answer
            .validate(&pending.question, &self.world)
            .map_err(ApiError::invalid_answer)?;
        let pending = inner.pending.take().expect("checked above");
        let sender = inner.answers.as_ref().ok_or(ApiError::NoPendingQuestion)?;
        sender
            .send(a.answer.clone())
            .map_err(|_| ApiError::Internal("learning loop has stopped".into()))?;
        inner.transcript.push(TranscriptEntry {
            question_id: pending.question_id,
            question: pending.question,
            answer: a.answer,
        });
        Ok(Ack {
            question_id: a.question_id,
            answered: inner.transcript.len(),
            learner: (*inner.learner).clone(),
        })
    }

    pub fn state(&self) -> SessionState {
        let inner = self.lock();
        let (status, error) = match &inner.outcome {
            Some(Outcome::Done { .. }) => (Status::Done, None),
            Some(Outcome::Failed(e)) => (Status::Failed, Some(e.clone())),
            None if inner.pending.is_some() => (Status::AwaitingAnswer, None),
            None => (Status::Running, None),
        };
        SessionState {
            id: self.id,
            mode: self.mode,
            status,
            error,
            answered: inner.transcript.len(),
            learner: (*inner.learner).clone(),
        }
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.lock().transcript.clone()
    }

    /// The event log as JSON lines, once the loop has finished.
    pub fn events(&self) -> Result<String, ApiError> {
        match &self.lock().outcome {
            Some(Outcome::Done { events }) => Ok(events.clone()),
            Some(Outcome::Failed(e)) => Err(ApiError::Internal(e.clone())),
            None => Err(ApiError::NotFinished(self.id)),
        }
    }
}
