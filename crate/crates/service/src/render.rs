//! Light scene previews shipped with each question.

use serde::{Deserialize, Serialize};

use aogqa::features::FeatureGrid;
use aogqa::geometry::BoxRect;
use aogqa::world::{Question, World};

/// Cells per side pooled into one preview pixel.
pub const SUMMARY_FACTOR: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePreview {
    pub scene: usize,
    /// Grid size in cells; boxes are in these units.
    pub width: usize,
    pub height: usize,
    pub heat_width: usize,
    pub heat_height: usize,
    /// Row-major mean absolute feature over channels and pooled cells.
    pub heat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderPayload {
    pub scenes: Vec<ScenePreview>,
    /// Proposed part boxes.
    pub boxes: Vec<(String, BoxRect)>,
    pub part_names: Vec<String>,
    /// Scenes to pick an exemplar from.
    pub candidates: Vec<usize>,
}

pub fn heat_summary(id: usize, grid: &FeatureGrid) -> ScenePreview {
    let (h, w, c) = (grid.height(), grid.width(), grid.channels());
    let (hh, hw) = (h.div_ceil(SUMMARY_FACTOR), w.div_ceil(SUMMARY_FACTOR));
    let mut heat = vec![0.0; hh * hw];
    let mut counts = vec![0usize; hh * hw];
    for y in 0..h {
        for x in 0..w {
            let v: f64 = (0..c).map(|k| grid.get(k, y, x).abs()).sum::<f64>() / c as f64;
            let i = (y / SUMMARY_FACTOR) * hw + x / SUMMARY_FACTOR;
            heat[i] += v;
            counts[i] += 1;
        }
    }
    for (v, n) in heat.iter_mut().zip(&counts) {
        *v /= *n as f64;
    }
    ScenePreview {
        scene: id,
        width: w,
        height: h,
        heat_width: hw,
        heat_height: hh,
        heat,
    }
}

pub fn render(world: &World, q: &Question) -> aogqa::Result<RenderPayload> {
    let preview =
        |s: usize| -> aogqa::Result<ScenePreview> { Ok(heat_summary(s, &world.scene(s)?.grid)) };
    let mut out = RenderPayload {
        scenes: Vec::new(),
        boxes: Vec::new(),
        part_names: Vec::new(),
        candidates: Vec::new(),
    };
    match q {
        Question::PartCount { .. } | Question::PartNames { .. } => {}
        Question::CheckPart { scene, part, bbox } => {
            out.scenes.push(preview(*scene)?);
            if let Some(b) = bbox {
                out.boxes.push((part.clone(), *b));
            }
            out.part_names.push(part.clone());
        }
        Question::LabelPart { scene, part } => {
            out.scenes.push(preview(*scene)?);
            out.part_names.push(part.clone());
        }
        Question::CheckSample { scene, exemplar } => {
            out.scenes.push(preview(*scene)?);
            out.scenes.push(preview(*exemplar)?);
        }
        Question::Exemplar { category, .. } => {
            out.candidates = world
                .pools
                .get(*category)
                .cloned()
                .ok_or(aogqa::Error::Config(format!("no category {category}")))?;
        }
    }
    Ok(out)
}
