//! Invisibility and deformation penalties, and pair weights, from observed detections.

use serde::{Deserialize, Serialize};

use crate::aog::model::Pose;
use crate::aog::scoring::score_deformation;
use crate::error::{Error, Result};
use crate::geometry::Region;

/// Floor on the mean squared geometry residual when deriving pair weights.
pub const MIN_RESIDUAL: f64 = 0.01;

/// Percentile with linear interpolation at rank `p (n - 1)` of the sorted samples.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("percentile of no samples"));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let rank = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(s[lo] + (rank - lo as f64) * (s[hi] - s[lo]))
}

/// Detected-case observations of one pose over a pool.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseObservations {
    /// Layer-4 scores per part where the part was detected.
    pub part_scores: Vec<Vec<f64>>,
    /// Squared geometry residuals per neighbor pair where both ends were detected.
    pub pair_residuals: Vec<Vec<f64>>,
}

impl PoseObservations {
    pub fn new(pose: &Pose) -> Self {
        PoseObservations {
            part_scores: vec![Vec::new(); pose.parts.len()],
            pair_residuals: vec![Vec::new(); pose.and.pairs.len()],
        }
    }

    /// Adds one scene: per-part `(score, region)` for the detected parts.
    pub fn add(&mut self, pose: &Pose, parts: &[Option<(f64, Region)>]) {
        for (i, p) in parts.iter().enumerate() {
            if let Some((s, _)) = p {
                self.part_scores[i].push(*s);
            }
        }
        for (k, pair) in pose.and.pairs.iter().enumerate() {
            if let (Some((_, a)), Some((_, b))) = (&parts[pair.a], &parts[pair.b]) {
                let d = score_deformation(&pair.mean_geometry, 0.0, Some(a), Some(b));
                if d.is_finite() {
                    self.pair_residuals[k].push(d);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    /// Deformation penalty `rho` of the pose AND node, in residual units.
    pub rho: Option<f64>,
    /// `rho_D` per part; `None` when the part was never detected.
    pub parts: Vec<Option<f64>>,
}

/// Each `rho_D` is the 10th percentile of the part's detected scores; `rho` is the
/// 10th percentile of the negated residuals, i.e. the 90th percentile residual,
/// floored at [`MIN_RESIDUAL`] like the pair weights.
pub fn estimate_penalties(obs: &PoseObservations) -> Result<Penalties> {
    let any = obs.part_scores.iter().any(|s| !s.is_empty());
    if !any {
        return Err(Error::Empty("no detected parts in the pool"));
    }
    let parts = obs
        .part_scores
        .iter()
        .map(|s| {
            if s.is_empty() {
                Ok(None)
            } else {
                percentile(s, 0.1).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<f64> = obs.pair_residuals.iter().flatten().map(|r| -r).collect();
    let rho = if all.is_empty() {
        None
    } else {
        Some((-percentile(&all, 0.1)?).max(MIN_RESIDUAL))
    };
    Ok(Penalties { rho, parts })
}

/// `-1 / (2 max(mean residual, MIN_RESIDUAL))`: a Gaussian log-likelihood weight.
pub fn pair_weight(residuals: &[f64]) -> Option<f64> {
    if residuals.is_empty() {
        return None;
    }
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    Some(-0.5 / mean.max(MIN_RESIDUAL))
}

/// Writes estimated penalties and pair weights into the pose, leaving unobserved entries.
pub fn apply_penalties(pose: &mut Pose, obs: &PoseObservations) -> Result<()> {
    let p = estimate_penalties(obs)?;
    for (part, rho) in pose.parts.iter_mut().zip(&p.parts) {
        if let Some(r) = rho {
            part.invisible_penalty = *r;
        }
    }
    if let Some(r) = p.rho {
        pose.and.undetected_penalty = r;
    }
    for (pair, res) in pose.and.pairs.iter_mut().zip(&obs.pair_residuals) {
        if let Some(w) = pair_weight(res) {
            pair.weight = w;
        }
    }
    Ok(())
}
