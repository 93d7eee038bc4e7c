//! Training a semantic part node from annotated boxes.

use crate::aog::model::{Part, Patch, PatchAppearance};
use crate::aog::scoring::Affine;
use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::geometry::BoxRect;

use super::calibration::calibrate_part;
use super::classifier::train_semantic_classifier;
use super::negatives::background_negatives;
use super::template::learn_part_template;

/// Stride over ladder placements when sampling negatives around an annotation.
pub const NEGATIVE_STRIDE: usize = 2;

/// One annotated box of the part, with the other annotated boxes of the same
/// scene that negatives must avoid.
#[derive(Debug, Clone, Copy)]
pub struct PartExample<'a> {
    pub grid: &'a FeatureGrid,
    pub bbox: BoxRect,
    pub keep_clear: &'a [BoxRect],
    /// Drawn by an annotator, as opposed to an accepted detection; only drawn
    /// boxes set the part size.
    pub drawn: bool,
}

/// Retrains `part` as a single-child semantic node: a linear classifier on the
/// annotated boxes against scene negatives plus `hard_negatives`, sized to the
/// mean drawn box (any box when none was drawn), calibrated on `background`, with a layer 6-9 template once two
/// boxes are known.
pub fn train_semantic_part(
    part: &mut Part,
    examples: &[PartExample<'_>],
    hard_negatives: &[Vec<f64>],
    background: &[FeatureGrid],
) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::Empty("semantic part without annotations"));
    }
    let positives: Vec<Vec<f64>> = examples.iter().map(|e| e.grid.pooled(&e.bbox)).collect();
    let mut negatives = hard_negatives.to_vec();
    for e in examples {
        negatives.extend(background_negatives(
            e.grid,
            &e.bbox,
            e.keep_clear,
            NEGATIVE_STRIDE,
        )?);
    }
    let classifier = train_semantic_classifier(&positives, &negatives)?;
    let drawn: Vec<&BoxRect> = examples
        .iter()
        .filter(|e| e.drawn)
        .map(|e| &e.bbox)
        .collect();
    let sizing: Vec<&BoxRect> = if drawn.is_empty() {
        examples.iter().map(|e| &e.bbox).collect()
    } else {
        drawn
    };
    let n = sizing.len() as f64;
    let w = sizing.iter().map(|b| b.width()).sum::<f64>() / n;
    let h = sizing.iter().map(|b| b.height()).sum::<f64>() / n;
    let template = if examples.len() >= 2 {
        let patches: Vec<(&FeatureGrid, BoxRect)> =
            examples.iter().map(|e| (e.grid, e.bbox)).collect();
        Some(learn_part_template(&patches)?)
    } else {
        None
    };
    part.scale = w;
    part.aspect = h / w;
    part.children = vec![Patch {
        appearance: PatchAppearance::Semantic { classifier },
        norm: Affine::IDENTITY,
        template,
    }];
    calibrate_part(part, background)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aog::model::PartKind;
    use crate::world::{generate_world, BackgroundSampler, WorldConfig};

    #[test]
    fn trained_part_prefers_its_annotations() {
        let cfg = WorldConfig::default();
        let world = generate_world(&cfg).unwrap();
        let bg = BackgroundSampler::new(&cfg, 99).grids(3);
        let scenes: Vec<_> = world.pools[0]
            .iter()
            .map(|&s| world.scene(s).unwrap())
            .filter(|s| s.relevant)
            .take(3)
            .collect();
        let name = world.semantic_names(0)[0].clone();
        let boxes: Vec<BoxRect> = scenes
            .iter()
            .map(|s| s.truth.as_ref().unwrap().part(&name).unwrap().bbox)
            .collect();
        let examples: Vec<PartExample> = scenes
            .iter()
            .zip(&boxes)
            .map(|(s, b)| PartExample {
                grid: &s.grid,
                bbox: *b,
                keep_clear: &[],
                drawn: true,
            })
            .collect();
        let mut part = Part {
            kind: PartKind::Semantic,
            name,
            aspect: 1.0,
            scale: 1.0,
            invisible_penalty: 0.0,
            children: Vec::new(),
        };
        train_semantic_part(&mut part, &examples, &[], &bg).unwrap();
        assert_eq!(part.children.len(), 1);
        assert!(part.children[0].template.is_some());
        assert!((part.scale - boxes[0].width()).abs() < 1e-9);
        for (s, b) in scenes.iter().zip(&boxes) {
            let (_, score) = part.best_child(&s.grid.pooled(b)).unwrap();
            assert!(score > 1.0, "annotated box scores {score}");
        }
    }

    #[test]
    fn no_annotations_is_an_error() {
        let mut part = Part {
            kind: PartKind::Semantic,
            name: "p".into(),
            aspect: 1.0,
            scale: 1.0,
            invisible_penalty: 0.0,
            children: Vec::new(),
        };
        assert!(train_semantic_part(&mut part, &[], &[], &[]).is_err());
    }
}
