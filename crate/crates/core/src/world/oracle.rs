//! Questions q1-q6, their answers, and the simulated annotator.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BoxRect};

use super::generate::{stream, World, ORACLE_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Question {
    /// q1: how many semantic parts does an object of this category have?
    PartCount { category: usize },
    /// q2: what are the part names?
    PartNames { category: usize },
    /// q3: is this part localized correctly? `bbox: None` proposes "not visible".
    CheckPart {
        scene: usize,
        part: String,
        bbox: Option<BoxRect>,
    },
    /// q4: draw the box of this part (or report it invisible).
    LabelPart { scene: usize, part: String },
    /// q5: does the scene show the same category and pose as the exemplar?
    CheckSample { scene: usize, exemplar: usize },
    /// q6: provide an exemplar of a pose not yet covered, with its semantic part boxes.
    Exemplar { category: usize, known_poses: usize },
}

impl Question {
    pub fn code(&self) -> &'static str {
        match self {
            Question::PartCount { .. } => "q1",
            Question::PartNames { .. } => "q2",
            Question::CheckPart { .. } => "q3",
            Question::LabelPart { .. } => "q4",
            Question::CheckSample { .. } => "q5",
            Question::Exemplar { .. } => "q6",
        }
    }

    pub fn scene(&self) -> Option<usize> {
        match self {
            Question::CheckPart { scene, .. }
            | Question::LabelPart { scene, .. }
            | Question::CheckSample { scene, .. } => Some(*scene),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub scene: usize,
    pub boxes: Vec<(String, BoxRect)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Answer {
    Count(usize),
    Names(Vec<String>),
    YesNo(bool),
    Box(Option<BoxRect>),
    Exemplar(Option<Exemplar>),
}

impl Answer {
    pub fn matches(&self, q: &Question) -> bool {
        matches!(
            (q, self),
            (Question::PartCount { .. }, Answer::Count(_))
                | (Question::PartNames { .. }, Answer::Names(_))
                | (Question::CheckPart { .. }, Answer::YesNo(_))
                | (Question::CheckSample { .. }, Answer::YesNo(_))
                | (Question::LabelPart { .. }, Answer::Box(_))
                | (Question::Exemplar { .. }, Answer::Exemplar(_))
        )
    }

    /// Kind check plus payload sanity (boxes valid and inside the scene grid).
    pub fn validate(&self, q: &Question, world: &World) -> Result<()> {
        if !self.matches(q) {
            return Err(Error::AnswerMismatch(format!(
                "{} cannot answer {}",
                self.kind_name(),
                q.code()
            )));
        }
        let check = |b: &BoxRect, scene: usize| -> Result<()> {
            let bounds = world.scene(scene)?.grid.bounds();
            if !b.is_valid() {
                return Err(Error::DegenerateBox);
            }
            if !bounds.contains(b) {
                return Err(Error::RegionOutsideScene);
            }
            Ok(())
        };
        match (q, self) {
            (Question::LabelPart { scene, .. }, Answer::Box(Some(b))) => check(b, *scene),
            (Question::Exemplar { .. }, Answer::Exemplar(Some(e))) => {
                if e.boxes.is_empty() {
                    return Err(Error::AnswerMismatch("exemplar without part boxes".into()));
                }
                for (name, b) in &e.boxes {
                    if name.trim().is_empty() {
                        return Err(Error::AnswerMismatch("empty part name".into()));
                    }
                    check(b, e.scene)?;
                }
                Ok(())
            }
            (Question::PartNames { .. }, Answer::Names(n))
                if n.iter().any(|s| s.trim().is_empty()) =>
            {
                Err(Error::AnswerMismatch("empty part name".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Answer::Count(_) => "count",
            Answer::Names(_) => "names",
            Answer::YesNo(_) => "yes_no",
            Answer::Box(_) => "box",
            Answer::Exemplar(_) => "exemplar",
        }
    }
}

/// Truthful answer from the scene ground truth.
pub fn truthful_answer(world: &World, q: &Question) -> Result<Answer> {
    Ok(match q {
        Question::PartCount { category } => Answer::Count(world.semantic_names(*category).len()),
        Question::PartNames { category } => Answer::Names(world.semantic_names(*category)),
        Question::CheckPart { scene, part, bbox } => {
            let truth = world.scene(*scene)?.truth.as_ref();
            let gt = truth.and_then(|t| t.part(part));
            let ok = match (gt, bbox) {
                (Some(g), Some(b)) if g.visible => b.is_valid() && iou(&g.bbox, b)? > 0.5,
                (Some(g), None) => !g.visible,
                _ => false,
            };
            Answer::YesNo(ok)
        }
        Question::LabelPart { scene, part } => {
            let truth = world.scene(*scene)?.truth.as_ref();
            Answer::Box(
                truth
                    .and_then(|t| t.part(part))
                    .filter(|g| g.visible)
                    .map(|g| g.bbox),
            )
        }
        Question::CheckSample { scene, exemplar } => {
            let s = world.scene(*scene)?;
            let e = world.scene(*exemplar)?;
            let same = match (&s.truth, &e.truth) {
                (Some(a), Some(b)) => s.relevant && a.pose == b.pose,
                _ => false,
            };
            Answer::YesNo(same)
        }
        Question::Exemplar {
            category,
            known_poses,
        } => match world.pose(*category, *known_poses) {
            None => Answer::Exemplar(None),
            Some(pose) => {
                let scene = world.exemplars[pose];
                let truth = world
                    .scene(scene)?
                    .truth
                    .as_ref()
                    .expect("exemplars carry truth");
                let boxes = truth
                    .parts
                    .iter()
                    .filter(|p| p.kind == crate::aog::model::PartKind::Semantic)
                    .map(|p| (p.name.clone(), p.bbox))
                    .collect();
                Answer::Exemplar(Some(Exemplar { scene, boxes }))
            }
        },
    })
}

/// Simulated annotator: truthful answers, corrupted with probability `epsilon`
/// (yes/no flipped, boxes shifted by up to a quarter of the part size).
#[derive(Debug, Clone)]
pub struct Oracle {
    world: Arc<World>,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl Oracle {
    pub fn new(world: Arc<World>, epsilon: f64) -> Self {
        let rng = stream(world.config.seed, ORACLE_STREAM);
        Oracle {
            world,
            epsilon,
            rng,
        }
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    fn jitter(&mut self, b: BoxRect, bounds: &BoxRect) -> BoxRect {
        let (w, h) = (b.width(), b.height());
        let dx = self.rng.random_range(-0.25..=0.25) * w;
        let dy = self.rng.random_range(-0.25..=0.25) * h;
        let dx = dx.clamp(bounds.x0 - b.x0, bounds.x1 - b.x1);
        let dy = dy.clamp(bounds.y0 - b.y0, bounds.y1 - b.y1);
        BoxRect::new(b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy)
    }

    pub fn answer(&mut self, q: &Question) -> Result<Answer> {
        let truth = truthful_answer(&self.world, q)?;
        if self.epsilon <= 0.0 {
            return Ok(truth);
        }
        let corrupt = self.rng.random_bool(self.epsilon.min(1.0));
        if !corrupt {
            return Ok(truth);
        }
        Ok(match truth {
            Answer::YesNo(v) => Answer::YesNo(!v),
            Answer::Box(Some(b)) => {
                let bounds = self
                    .world
                    .scene(q.scene().expect("q4 names a scene"))?
                    .grid
                    .bounds();
                Answer::Box(Some(self.jitter(b, &bounds)))
            }
            Answer::Exemplar(Some(mut e)) => {
                let bounds = self.world.scene(e.scene)?.grid.bounds();
                for (_, b) in e.boxes.iter_mut() {
                    *b = self.jitter(*b, &bounds);
                }
                Answer::Exemplar(Some(e))
            }
            other => other,
        })
    }
}
