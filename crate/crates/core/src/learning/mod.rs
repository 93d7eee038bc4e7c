pub mod calibration;
pub mod classifier;
pub mod hard_negatives;
pub mod negatives;
pub mod penalties;
pub mod semantic;
pub mod structure;
pub mod template;

pub use classifier::train_semantic_classifier;
pub use template::learn_part_template;
