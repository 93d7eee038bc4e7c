//! Hard negatives from scenes parsed as the wrong pose.

use serde::{Deserialize, Serialize};

use crate::aog::model::{Aog, PartKind};
use crate::error::Result;
use crate::features::FeatureGrid;
use crate::geometry::iou;
use crate::inference::{parse_among, parse_pose, InferenceConfig};

use super::negatives::NEGATIVE_MAX_IOU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardNegative {
    /// Pose that wrongly won the scene.
    pub pose: usize,
    pub part: String,
    pub feature: Vec<f64>,
}

/// Parses every scene (known to show `true_pose`) among `candidates`. Where a
/// different pose wins, the regions its semantic parts claimed become negatives
/// for those parts, unless they overlap the true pose's part of the same name.
pub fn mine_hard_negatives(
    aog: &Aog,
    true_pose: usize,
    candidates: &[usize],
    scenes: &[&FeatureGrid],
    cfg: &InferenceConfig,
) -> Result<Vec<HardNegative>> {
    aog.pose(true_pose)?;
    let mut out = Vec::new();
    for g in scenes {
        let best = parse_among(aog, candidates, g, None, cfg)?;
        if best.pose == true_pose {
            continue;
        }
        let truth = parse_pose(aog, true_pose, g, None, cfg)?;
        for p in best.parts.iter().filter(|p| p.kind == PartKind::Semantic) {
            let Some(b) = p.bbox() else { continue };
            if let Some(tb) = truth.part(&p.name).and_then(|t| t.bbox()) {
                if iou(&b, &tb)? >= NEGATIVE_MAX_IOU {
                    continue;
                }
            }
            out.push(HardNegative {
                pose: best.pose,
                part: p.name.clone(),
                feature: g.pooled(&b),
            });
        }
    }
    Ok(out)
}
