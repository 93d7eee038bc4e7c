//! Cost-sensitive question answering: storylines, risk bookkeeping and the learning loop.

pub mod cost;
pub mod events;
pub mod learner;
pub mod ledger;
pub mod loss;
pub mod source;

pub use cost::{storyline_cost, CostModel, CostState, Storyline, StorylineKind, Target};
pub use events::{Event, EventLog};
pub use learner::{run_learning_loop, run_learning_loop_observed, Learner, LearnerConfig};
pub use ledger::{
    estimate_pose_probability, predict_gains, select_next_storyline, Candidate, GainRecord, Losses,
    RiskLedger, RiskPoint,
};
pub use loss::{discriminative_loss, generative_loss};
pub use source::AnswerSource;
