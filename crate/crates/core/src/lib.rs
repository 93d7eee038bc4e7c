//! And-Or graph object parsing with a cost-sensitive question-answer learning loop.

pub mod aog;
pub mod error;
pub mod features;
pub mod geometry;
pub mod inference;
pub mod learning;
pub mod metrics;
pub mod qa;
pub mod world;

pub use error::{Error, Result};
