//! Part localization metrics and held-out evaluation.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aog::model::{Aog, PartKind};
use crate::error::{Error, Result};
use crate::geometry::BoxRect;
use crate::inference::{detect_best_object_with, InferenceConfig, ParseGraph};
use crate::world::{GroundTruth, World};

pub use crate::geometry::iou;

/// A part counts as localized when its IoU with the truth exceeds this.
pub const IOU_THRESHOLD: f64 = 0.5;

fn hit(pred: Option<BoxRect>, truth: &BoxRect) -> Result<bool> {
    match pred {
        Some(p) => Ok(iou(&p, truth)? > IOU_THRESHOLD),
        None => Ok(false),
    }
}

/// `(correct, total)` per semantic part type. Parts invisible in the truth are skipped.
pub fn part_type_counts(
    parses: &[ParseGraph],
    truths: &[GroundTruth],
) -> Result<BTreeMap<String, (usize, usize)>> {
    if parses.len() != truths.len() {
        return Err(Error::Config(format!(
            "{} parses for {} truths",
            parses.len(),
            truths.len()
        )));
    }
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (pg, gt) in parses.iter().zip(truths) {
        for t in gt
            .parts
            .iter()
            .filter(|t| t.kind == PartKind::Semantic && t.visible)
        {
            let pred = pg.part(&t.name).and_then(|p| p.bbox());
            let c = counts.entry(t.name.clone()).or_default();
            c.1 += 1;
            if hit(pred, &t.bbox)? {
                c.0 += 1;
            }
        }
    }
    Ok(counts)
}

/// Unweighted mean over semantic part types of the fraction localized.
pub fn app(parses: &[ParseGraph], truths: &[GroundTruth]) -> Result<f64> {
    app_from_counts(&part_type_counts(parses, truths)?)
}

pub fn app_from_counts(counts: &BTreeMap<String, (usize, usize)>) -> Result<f64> {
    let rates: Vec<f64> = counts
        .values()
        .filter(|c| c.1 > 0)
        .map(|&(k, n)| k as f64 / n as f64)
        .collect();
    if rates.is_empty() {
        return Err(Error::Empty("no semantic part types"));
    }
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

/// `(correct, total)` parts of one object over the parts of the parsed pose.
/// Semantic parts invisible in the truth are left out; a latent part is correct
/// when it overlaps any visible latent truth part.
pub fn object_part_counts(pg: &ParseGraph, gt: &GroundTruth) -> Result<(usize, usize)> {
    let latent: Vec<&BoxRect> = gt
        .parts
        .iter()
        .filter(|t| t.kind == PartKind::Latent && t.visible)
        .map(|t| &t.bbox)
        .collect();
    let (mut correct, mut total) = (0, 0);
    for p in &pg.parts {
        match p.kind {
            PartKind::Semantic => {
                let Some(t) = gt.part(&p.name).filter(|t| t.visible) else {
                    continue;
                };
                total += 1;
                if hit(p.bbox(), &t.bbox)? {
                    correct += 1;
                }
            }
            PartKind::Latent => {
                total += 1;
                let mut any = false;
                for t in &latent {
                    if hit(p.bbox(), t)? {
                        any = true;
                        break;
                    }
                }
                if any {
                    correct += 1;
                }
            }
        }
    }
    Ok((correct, total))
}

/// Strictly more than two thirds of the parts correct.
pub fn explained(correct: usize, total: usize) -> bool {
    total > 0 && 3 * correct > 2 * total
}

/// Fraction of objects explained; zero (with a warning) for no objects.
pub fn aer(parses: &[ParseGraph], truths: &[GroundTruth]) -> Result<f64> {
    if parses.len() != truths.len() {
        return Err(Error::Config(format!(
            "{} parses for {} truths",
            parses.len(),
            truths.len()
        )));
    }
    let counts = parses
        .iter()
        .zip(truths)
        .map(|(p, t)| object_part_counts(p, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(aer_from_counts(&counts))
}

pub fn aer_from_counts(counts: &[(usize, usize)]) -> f64 {
    if counts.is_empty() {
        warn!("explanation rate of zero objects");
        return 0.0;
    }
    counts.iter().filter(|&&(k, n)| explained(k, n)).count() as f64 / counts.len() as f64
}

/// Center distance over the diagonal of the truth box.
pub fn localization_error(pred_center: (f64, f64), gt_box: &BoxRect) -> Result<f64> {
    if !gt_box.is_valid() {
        return Err(Error::DegenerateBox);
    }
    let (cx, cy) = gt_box.center();
    let d = ((pred_center.0 - cx).powi(2) + (pred_center.1 - cy).powi(2)).sqrt();
    Ok(d / (gt_box.width().powi(2) + gt_box.height().powi(2)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Correct rate per semantic part type.
    pub part_rates: BTreeMap<String, f64>,
    pub app: f64,
    pub aer: f64,
    /// Mean localization error over visible semantic parts that were detected.
    pub localization_error: f64,
    pub objects: usize,
    pub parts: usize,
}

/// Best-object parses of held-out scenes: each object is explained by its
/// category's poses within the detection window around the truth.
pub fn parse_heldout(
    aog: &Aog,
    world: &World,
    scenes: &[usize],
    cfg: &InferenceConfig,
) -> Result<Vec<(ParseGraph, GroundTruth)>> {
    scenes
        .par_iter()
        .map(|&s| {
            let scene = world.scene(s)?;
            let gt = scene.truth.clone().ok_or(Error::UnknownScene(s))?;
            let poses = &aog
                .categories
                .get(gt.category)
                .ok_or_else(|| Error::Config(format!("graph has no category {}", gt.category)))?
                .poses;
            let pg = detect_best_object_with(aog, &scene.grid, &gt.object_box(), Some(poses), cfg)?;
            Ok((pg, gt))
        })
        .collect()
}

pub fn evaluate(
    aog: &Aog,
    world: &World,
    scenes: &[usize],
    cfg: &InferenceConfig,
) -> Result<EvalReport> {
    let pairs = parse_heldout(aog, world, scenes, cfg)?;
    let (parses, truths): (Vec<ParseGraph>, Vec<GroundTruth>) = pairs.into_iter().unzip();
    report(&parses, &truths)
}

pub fn report(parses: &[ParseGraph], truths: &[GroundTruth]) -> Result<EvalReport> {
    let counts = part_type_counts(parses, truths)?;
    let mut errors = Vec::new();
    for (pg, gt) in parses.iter().zip(truths) {
        for t in gt
            .parts
            .iter()
            .filter(|t| t.kind == PartKind::Semantic && t.visible)
        {
            if let Some(b) = pg.part(&t.name).and_then(|p| p.bbox()) {
                errors.push(localization_error(b.center(), &t.bbox)?);
            }
        }
    }
    Ok(EvalReport {
        part_rates: counts
            .iter()
            .map(|(k, &(c, n))| (k.clone(), c as f64 / n.max(1) as f64))
            .collect(),
        app: app_from_counts(&counts)?,
        aer: aer(parses, truths)?,
        localization_error: if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        },
        objects: parses.len(),
        parts: counts.values().map(|c| c.1).sum(),
    })
}
