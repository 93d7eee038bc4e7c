use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("degenerate box (zero or negative area)")]
    DegenerateBox,
    #[error("coincident part centers")]
    CoincidentCenters,
    #[error("zero variance in calibration samples")]
    ZeroVariance,
    #[error("missing region for detected child {0}")]
    MissingRegion(usize),
    #[error("every assignment is infeasible")]
    Infeasible,
    #[error("input kind does not match the part kind: {0}")]
    KindMismatch(String),
    #[error("degenerate training data: {0}")]
    Degenerate(&'static str),
    #[error("malformed and-or graph: {0}")]
    MalformedGraph(String),
    #[error("unknown scene {0}")]
    UnknownScene(usize),
    #[error("unknown pose {0}")]
    UnknownPose(usize),
    #[error("unknown storyline kind {0}")]
    UnknownStoryline(u8),
    #[error("region outside scene")]
    RegionOutsideScene,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("answer source unavailable: {0}")]
    AnswerUnavailable(String),
    #[error("answer does not match question: {0}")]
    AnswerMismatch(String),
    #[error("unsupported document: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
