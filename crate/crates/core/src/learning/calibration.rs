//! Background calibration of patch and pose scores.

use crate::aog::model::{Aog, Part, Patch, PatchAppearance, Pose};
use crate::aog::scoring::{calibrate_normalization, mean_std, Affine};
use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::geometry::{pairwise_geometry, squared_distance};
use crate::inference::{parse_pose, placements, placements_on, InferenceConfig};

/// Every `PLACEMENT_STRIDE`-th ladder placement of a background grid is sampled.
pub const PLACEMENT_STRIDE: usize = 3;

/// Stride over placements when sampling background part pairs.
pub const PAIR_STRIDE: usize = 2;

/// Patch score before its norm, oriented so that larger is a better match.
pub fn raw_patch_score(patch: &Patch, x: &[f64]) -> Result<f64> {
    match &patch.appearance {
        PatchAppearance::Latent { mean } => {
            if mean.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: mean.len(),
                    got: x.len(),
                });
            }
            Ok(-squared_distance(mean, x))
        }
        PatchAppearance::Semantic { classifier } => classifier.margin(x),
    }
}

/// Norm that maps raw scores (in [`raw_patch_score`] orientation) to the
/// standardized scale. Latent norms act on the squared distance, hence the sign flip.
pub fn patch_norm(patch: &Patch, standardize: Affine) -> Affine {
    match patch.appearance {
        PatchAppearance::Latent { .. } => Affine {
            w: -standardize.w,
            b: standardize.b,
        },
        PatchAppearance::Semantic { .. } => standardize,
    }
}

/// Raw scores of one child of `part` at the ladder placements of each grid.
pub fn background_patch_scores(
    part: &Part,
    child: usize,
    grids: &[FeatureGrid],
    stride: usize,
) -> Result<Vec<f64>> {
    let patch = part
        .children
        .get(child)
        .ok_or_else(|| Error::KindMismatch(format!("part {} has no child {child}", part.name)))?;
    let mut out = Vec::new();
    let mut buf = Vec::new();
    for g in grids {
        for r in placements(part.scale, part.aspect, g.width(), g.height(), None)
            .into_iter()
            .step_by(stride.max(1))
        {
            g.pooled_into(&r.bbox(), &mut buf);
            out.push(raw_patch_score(patch, &buf)?);
        }
    }
    Ok(out)
}

/// Sets the norm of every child of `part` so its background scores have zero
/// mean and unit variance.
pub fn calibrate_part(part: &mut Part, grids: &[FeatureGrid]) -> Result<()> {
    for c in 0..part.children.len() {
        let raw = background_patch_scores(part, c, grids, PLACEMENT_STRIDE)?;
        let a = calibrate_normalization(&raw)?;
        let patch = &mut part.children[c];
        patch.norm = patch_norm(patch, a);
    }
    Ok(())
}

/// Deformation weight of pair `k` of `pose`: `-1 / sd` of its residual over
/// independent nominal-scale placements of both parts on a `width x height`
/// grid, so a pair term varies on the same unit scale as calibrated appearance.
pub fn background_pair_weight(pose: &Pose, k: usize, width: usize, height: usize) -> Result<f64> {
    let pair = pose
        .and
        .pairs
        .get(k)
        .ok_or_else(|| Error::Config(format!("pose has no pair {k}")))?;
    let at = |i: usize| -> Result<Vec<_>> {
        let p = pose
            .parts
            .get(i)
            .ok_or_else(|| Error::MalformedGraph(format!("pair references part {i}")))?;
        Ok(
            placements_on(&[1.0], p.scale, p.aspect, width, height, None)
                .into_iter()
                .step_by(PAIR_STRIDE)
                .collect(),
        )
    };
    let (ra, rb) = (at(pair.a)?, at(pair.b)?);
    let mut residuals = Vec::with_capacity(ra.len() * rb.len());
    for a in &ra {
        for b in &rb {
            if let Ok(g) = pairwise_geometry(a, b) {
                residuals.push(squared_distance(&g, &pair.mean_geometry));
            }
        }
    }
    Ok(-calibrate_normalization(&residuals)?.w)
}

/// Sets every pair weight of `pose` with [`background_pair_weight`].
pub fn calibrate_pair_weights(pose: &mut Pose, width: usize, height: usize) -> Result<()> {
    for k in 0..pose.and.pairs.len() {
        pose.and.pairs[k].weight = background_pair_weight(pose, k, width, height)?;
    }
    Ok(())
}

/// Sets the pose norm from its best parse on each background grid. A pose that
/// scores the same on every grid (for instance, always fully invisible) gets a
/// pure offset.
pub fn calibrate_pose(
    aog: &mut Aog,
    pose_id: usize,
    grids: &[FeatureGrid],
    cfg: &InferenceConfig,
) -> Result<()> {
    aog.poses
        .get_mut(pose_id)
        .ok_or(Error::UnknownPose(pose_id))?
        .and
        .norm = Affine::IDENTITY;
    let raw = grids
        .iter()
        .map(|g| parse_pose(aog, pose_id, g, None, cfg).map(|p| p.score))
        .collect::<Result<Vec<_>>>()?;
    let norm = match calibrate_normalization(&raw) {
        Ok(a) => a,
        Err(Error::ZeroVariance) => Affine {
            w: 1.0,
            b: -mean_std(&raw).0,
        },
        Err(e) => return Err(e),
    };
    aog.poses[pose_id].and.norm = norm;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aog::model::{LinearClassifier, PartKind};
    use crate::world::{BackgroundSampler, WorldConfig};

    fn part(appearance: PatchAppearance) -> Part {
        Part {
            kind: match appearance {
                PatchAppearance::Latent { .. } => PartKind::Latent,
                PatchAppearance::Semantic { .. } => PartKind::Semantic,
            },
            name: "p".into(),
            aspect: 1.0,
            scale: 4.0,
            invisible_penalty: -1.0,
            children: vec![Patch {
                appearance,
                norm: Affine::IDENTITY,
                template: None,
            }],
        }
    }

    #[test]
    fn calibrated_latent_patch_standardizes_its_own_background() {
        let cfg = WorldConfig::default();
        let grids = BackgroundSampler::new(&cfg, 11).grids(4);
        let mut p = part(PatchAppearance::Latent {
            mean: vec![0.5; cfg.feature_dim()],
        });
        calibrate_part(&mut p, &grids).unwrap();
        assert!(p.children[0].norm.w < 0.0);
        let raw = background_patch_scores(&p, 0, &grids, PLACEMENT_STRIDE).unwrap();
        let z: Vec<f64> = raw.iter().map(|&r| p.children[0].norm.apply(-r)).collect();
        let (m, s) = mean_std(&z);
        assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn semantic_norm_keeps_orientation() {
        let cfg = WorldConfig::default();
        let grids = BackgroundSampler::new(&cfg, 12).grids(2);
        let mut w = vec![0.0; cfg.feature_dim()];
        w[0] = 1.0;
        let mut p = part(PatchAppearance::Semantic {
            classifier: LinearClassifier {
                weights: w,
                bias: 0.0,
            },
        });
        calibrate_part(&mut p, &grids).unwrap();
        assert!(p.children[0].norm.w > 0.0);
    }
}
