//! Synthetic world: hidden generators, keyword pools and the simulated annotator.

pub mod archive;
pub mod config;
pub mod generate;
pub mod oracle;

pub use config::WorldConfig;
pub use generate::{
    generate_world, BackgroundSampler, GroundTruth, GtPart, RenderOptions, Scene, Split, World,
};
pub use oracle::{truthful_answer, Answer, Exemplar, Oracle, Question};
