//! Generative and discriminative losses of a pose over its collected samples.

use rayon::prelude::*;

use crate::aog::model::{Aog, PartKind};
use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::geometry::{iou, Region};
use crate::inference::{parse_pose, score_part_at, InferenceConfig, ParseGraph};

use super::ledger::Losses;

pub use crate::inference::PartLabels;

/// `max(0, max_C (1 + S(C) - S(C*)))` over the wrong poses `C`.
pub fn category_hinge(true_score: f64, wrong_scores: &[f64]) -> f64 {
    wrong_scores
        .iter()
        .map(|s| 1.0 + s - true_score)
        .fold(0.0, f64::max)
}

/// `max(0, (1 - IoU) + S(P)|predicted - S(P)|annotated)`.
pub fn part_hinge(overlap: f64, predicted_score: f64, annotated_score: f64) -> f64 {
    (1.0 - overlap + predicted_score - annotated_score).max(0.0)
}

/// A collected sample, with its part labels once checked.
#[derive(Debug, Clone, Copy)]
pub struct LossScene<'a> {
    pub grid: &'a FeatureGrid,
    pub labels: Option<&'a PartLabels>,
}

fn part_terms(
    aog: &Aog,
    pg: &ParseGraph,
    grid: &FeatureGrid,
    labels: &PartLabels,
) -> Result<Vec<f64>> {
    let pose = aog.pose(pg.pose)?;
    let mut out = Vec::new();
    let mut buf = Vec::new();
    for (i, part) in pose.parts.iter().enumerate() {
        if part.kind != PartKind::Semantic {
            continue;
        }
        let Some(label) = labels.get(&part.name) else {
            continue;
        };
        let pred = &pg.parts[i];
        let annotated = match label {
            Some(b) => score_part_at(part, grid, &Region::from_box(b)?, &mut buf)?.1,
            None => part.invisible_penalty,
        };
        let overlap = match (pred.bbox(), label) {
            (Some(p), Some(t)) => iou(&p, t)?,
            (None, None) => 1.0,
            _ => 0.0,
        };
        out.push(part_hinge(overlap, pred.score, annotated));
    }
    Ok(out)
}

/// All three losses of `pose_id`: `L_gen` is the mean negated pose score, `L_cate`
/// the mean structured hinge against every other pose of the graph, and `L_part`
/// the mean part hinge over labeled semantic parts (zero when nothing is labeled).
pub fn pose_losses(
    aog: &Aog,
    pose_id: usize,
    scenes: &[LossScene<'_>],
    cfg: &InferenceConfig,
) -> Result<Losses> {
    aog.pose(pose_id)?;
    if scenes.is_empty() {
        return Err(Error::Empty("pose without samples"));
    }
    let per_scene: Vec<(f64, f64, Vec<f64>)> = scenes
        .par_iter()
        .map(|s| {
            let mut own = None;
            let mut wrong = Vec::new();
            for p in 0..aog.poses.len() {
                let pg = parse_pose(aog, p, s.grid, None, cfg)?;
                if p == pose_id {
                    own = Some(pg);
                } else {
                    wrong.push(pg.score);
                }
            }
            let own = own.expect("pose exists");
            let parts = match s.labels {
                Some(l) => part_terms(aog, &own, s.grid, l)?,
                None => Vec::new(),
            };
            Ok((-own.score, category_hinge(own.score, &wrong), parts))
        })
        .collect::<Result<_>>()?;
    let n = per_scene.len() as f64;
    let parts: Vec<f64> = per_scene.iter().flat_map(|s| s.2.iter().copied()).collect();
    Ok(Losses {
        gen: per_scene.iter().map(|s| s.0).sum::<f64>() / n,
        cate: per_scene.iter().map(|s| s.1).sum::<f64>() / n,
        part: if parts.is_empty() {
            0.0
        } else {
            parts.iter().sum::<f64>() / parts.len() as f64
        },
    })
}

/// `L_gen`: mean of `-S_I(PO)` over the samples.
pub fn generative_loss(
    aog: &Aog,
    pose_id: usize,
    scenes: &[&FeatureGrid],
    cfg: &InferenceConfig,
) -> Result<f64> {
    if scenes.is_empty() {
        return Err(Error::Empty("pose without samples"));
    }
    let scores = scenes
        .iter()
        .map(|g| parse_pose(aog, pose_id, g, None, cfg).map(|p| p.score))
        .collect::<Result<Vec<_>>>()?;
    Ok(-scores.iter().sum::<f64>() / scores.len() as f64)
}

/// `(L_cate, L_part)` over labeled samples. Every sample must carry labels.
pub fn discriminative_loss(
    aog: &Aog,
    pose_id: usize,
    labeled: &[(&FeatureGrid, &PartLabels)],
    cfg: &InferenceConfig,
) -> Result<(f64, f64)> {
    if labeled.is_empty() {
        return Err(Error::Empty("no labeled samples"));
    }
    let scenes: Vec<LossScene> = labeled
        .iter()
        .map(|(g, l)| LossScene {
            grid: g,
            labels: Some(l),
        })
        .collect();
    let l = pose_losses(aog, pose_id, &scenes, cfg)?;
    Ok((l.cate, l.part))
}

/// Best normalized score per scene over the given poses of a category; zero
/// (the background level) when the category has no pose yet.
pub fn category_scores(
    aog: &Aog,
    poses: &[usize],
    scenes: &[&FeatureGrid],
    cfg: &InferenceConfig,
) -> Result<Vec<f64>> {
    scenes
        .par_iter()
        .map(|g| {
            let mut best: Option<f64> = None;
            for &p in poses {
                let s = parse_pose(aog, p, g, None, cfg)?.score;
                best = Some(best.map_or(s, |b: f64| b.max(s)));
            }
            Ok(best.unwrap_or(0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_hinge_examples() {
        // correct with margin: no loss
        assert_eq!(category_hinge(3.0, &[1.0]), 0.0);
        // wrong pose trails by 2: the margin is met
        assert_eq!(category_hinge(0.0, &[-2.0]), 0.0);
        // wrong pose ahead by 0.5
        assert!((category_hinge(0.0, &[0.5, -3.0]) - 1.5).abs() < 1e-12);
        assert_eq!(category_hinge(1.0, &[]), 0.0);
    }

    #[test]
    fn part_hinge_examples() {
        assert!((part_hinge(0.5, 0.0, 0.0) - 0.5).abs() < 1e-12);
        assert_eq!(part_hinge(1.0, 2.0, 2.0), 0.0);
        assert_eq!(part_hinge(0.0, -1.0, 2.0), 0.0);
    }

    #[test]
    fn discriminative_loss_needs_labels() {
        let aog = Aog::new(3);
        assert!(discriminative_loss(&aog, 0, &[], &InferenceConfig::default()).is_err());
    }
}
