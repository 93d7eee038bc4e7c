//! Storyline kinds and the question/computation cost model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::Question;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub ckp: f64,
    pub cko: f64,
    pub lbp: f64,
    pub ret: f64,
    pub col: f64,
    pub pose: f64,
    /// Samples checked per collection.
    pub n: usize,
    pub v_cate: f64,
    pub v_part: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            ckp: 1.0,
            cko: 1.0,
            lbp: 5.0,
            ret: 0.01,
            col: 0.01,
            pose: 50.0,
            n: 10,
            v_cate: 1.0,
            v_part: 1.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.ckp,
            self.cko,
            self.lbp,
            self.ret,
            self.col,
            self.pose,
            self.v_cate,
            self.v_part,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "cost constants must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Labor charged for asking `q`. Part counts and names carry no charge.
    pub fn question_cost(&self, q: &Question) -> f64 {
        match q {
            Question::PartCount { .. } | Question::PartNames { .. } => 0.0,
            Question::CheckPart { .. } => self.ckp,
            Question::LabelPart { .. } => self.lbp,
            Question::CheckSample { .. } => self.cko,
            Question::Exemplar { .. } => self.pose,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum StorylineKind {
    /// Retrain pose classification with hard negatives.
    Retrain,
    /// Check and correct semantic part localizations.
    CheckParts,
    /// Collect samples and mine the latent structure.
    Collect,
    /// Label a new pose and mine it from scratch.
    NewPose,
}

impl StorylineKind {
    pub const ALL: [StorylineKind; 4] = [
        StorylineKind::Retrain,
        StorylineKind::CheckParts,
        StorylineKind::Collect,
        StorylineKind::NewPose,
    ];

    pub fn number(self) -> u8 {
        match self {
            StorylineKind::Retrain => 1,
            StorylineKind::CheckParts => 2,
            StorylineKind::Collect => 3,
            StorylineKind::NewPose => 4,
        }
    }

    /// Loss components the storyline is meant to decrease: `(gen, cate, part)`.
    pub fn components(self) -> [bool; 3] {
        match self {
            StorylineKind::Retrain => [false, true, false],
            StorylineKind::CheckParts => [false, true, true],
            StorylineKind::Collect => [true, true, true],
            StorylineKind::NewPose => [true, false, false],
        }
    }

    pub fn participant(self) -> Participant {
        match self {
            StorylineKind::Retrain => Participant::Computer,
            StorylineKind::CheckParts => Participant::User,
            StorylineKind::Collect => Participant::UserAndComputer,
            StorylineKind::NewPose => Participant::InstructorAndComputer,
        }
    }

    /// Question codes the storyline may ask.
    pub fn questions(self) -> &'static [&'static str] {
        match self {
            StorylineKind::Retrain => &[],
            StorylineKind::CheckParts => &["q1", "q2", "q3", "q4"],
            StorylineKind::Collect => &["q1", "q2", "q3", "q4", "q5"],
            StorylineKind::NewPose => &["q1", "q2", "q3", "q4", "q5", "q6"],
        }
    }
}

impl TryFrom<u8> for StorylineKind {
    type Error = Error;

    fn try_from(k: u8) -> Result<Self> {
        match k {
            1 => Ok(StorylineKind::Retrain),
            2 => Ok(StorylineKind::CheckParts),
            3 => Ok(StorylineKind::Collect),
            4 => Ok(StorylineKind::NewPose),
            _ => Err(Error::UnknownStoryline(k)),
        }
    }
}

impl From<StorylineKind> for u8 {
    fn from(k: StorylineKind) -> u8 {
        k.number()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Participant {
    Computer,
    User,
    UserAndComputer,
    InstructorAndComputer,
}

/// What a storyline acts on: an existing pose, or a category that gets a new pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Pose(usize),
    Category(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Storyline {
    pub kind: StorylineKind,
    pub target: Target,
    pub participant: Participant,
    pub questions: Vec<String>,
}

impl Storyline {
    pub fn new(kind: StorylineKind, target: Target) -> Result<Self> {
        let consistent = matches!(
            (kind, target),
            (StorylineKind::NewPose, Target::Category(_))
                | (
                    StorylineKind::Retrain | StorylineKind::CheckParts | StorylineKind::Collect,
                    Target::Pose(_)
                )
        );
        if !consistent {
            return Err(Error::Config(format!(
                "storyline {} cannot target {target:?}",
                kind.number()
            )));
        }
        Ok(Storyline {
            kind,
            target,
            participant: kind.participant(),
            questions: kind.questions().iter().map(|s| s.to_string()).collect(),
        })
    }
}

/// Pool sizes entering the a-priori cost of a storyline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostState {
    /// `|I^_PO|`: samples collected for the pose.
    pub pose_pool: usize,
    /// `|Theta_pose|`: pose nodes in the graph.
    pub poses: usize,
    /// `|I_C|`: the category's keyword pool.
    pub category_pool: usize,
    /// `|SemanticCh(PO)|`.
    pub semantic_parts: usize,
}

/// A-priori cost of a storyline from its per-kind formula.
pub fn storyline_cost(kind: StorylineKind, s: &CostState, m: &CostModel) -> f64 {
    let ret = m.ret * s.pose_pool as f64 * s.poses as f64;
    let col = m.col * s.category_pool as f64;
    let cko = m.cko * m.n as f64;
    let ckp = m.ckp * s.semantic_parts as f64;
    let lbp = m.lbp * s.semantic_parts as f64;
    match kind {
        StorylineKind::Retrain => ret,
        StorylineKind::CheckParts => ckp + lbp,
        StorylineKind::Collect => col + cko + ckp + lbp + ret,
        StorylineKind::NewPose => m.pose + 3.0 * col + 3.0 * cko + lbp + ret,
    }
}

/// [`storyline_cost`] for a raw kind number.
pub fn storyline_cost_by_number(kind: u8, s: &CostState, m: &CostModel) -> Result<f64> {
    Ok(storyline_cost(StorylineKind::try_from(kind)?, s, m))
}

/// Collection quota `round_half_up(3 * 1.5^k)` for the `k`-th collection (k >= 1).
pub fn collection_quota(k: u32) -> usize {
    (3.0 * 1.5f64.powi(k as i32) + 0.5).floor() as usize
}
