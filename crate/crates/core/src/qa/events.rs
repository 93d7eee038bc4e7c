//! Append-only event log with logical step counters.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::learning::structure::MiningMove;
use crate::world::{Answer, Question};

use super::cost::{StorylineKind, Target};
use super::ledger::Losses;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Question {
        step: u64,
        storyline: usize,
        question: Question,
        answer: Answer,
        cost: f64,
    },
    Computation {
        step: u64,
        storyline: usize,
        what: String,
        cost: f64,
    },
    Mining {
        step: u64,
        storyline: usize,
        pose: usize,
        moves: Vec<MiningMove>,
        objective: Vec<f64>,
    },
    Storyline {
        step: u64,
        storyline: usize,
        kind: StorylineKind,
        target: Target,
        /// Pose created or acted on; `None` when a new-pose request found nothing.
        pose: Option<usize>,
        predicted_cost: f64,
        predicted_delta: Losses,
        realized_cost: f64,
        realized_delta: Losses,
        risk: f64,
        cumulative_cost: f64,
    },
}

impl Event {
    pub fn step(&self) -> u64 {
        match self {
            Event::Question { step, .. }
            | Event::Computation { step, .. }
            | Event::Mining { step, .. }
            | Event::Storyline { step, .. } => *step,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn next_step(&self) -> u64 {
        self.events.len() as u64
    }

    /// Appends the event built for the next step.
    pub fn push(&mut self, make: impl FnOnce(u64) -> Event) {
        let e = make(self.next_step());
        self.events.push(e);
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(EventLog { events })
    }

    pub fn questions(&self) -> impl Iterator<Item = (&Question, &Answer)> {
        self.events.iter().filter_map(|e| match e {
            Event::Question {
                question, answer, ..
            } => Some((question, answer)),
            _ => None,
        })
    }
}
