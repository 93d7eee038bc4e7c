//! Typed working representation of the nine-layer graph.
//!
//! Layer 1 is the implicit root OR over [`Category`] nodes (layer 2 ORs over poses).
//! A [`Pose`] is a layer-3 AND over [`Part`]s (layer-4 ORs with an invisible
//! child). Each part has layer-5 [`Patch`] children; a semantic patch may carry a
//! [`PartTemplate`] describing layers 6-9.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxRect, Region};

use super::scoring::{score_layer5_child, Affine, AndParams, Layer5Input};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearClassifier {
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Latent,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchAppearance {
    /// Mean appearance `Phi(D)`; scored by squared residual.
    Latent { mean: Vec<f64> },
    /// Linear classifier; scored by its margin.
    Semantic { classifier: LinearClassifier },
}

/// A layer-5 child of a part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub appearance: PatchAppearance,
    /// `(w_D, b_D)`; `w_D < 0` for latent patches.
    pub norm: Affine,
    pub template: Option<PartTemplate>,
}

/// Box expressed in fractions of a parent box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl RelBox {
    pub fn place(&self, parent: &BoxRect) -> BoxRect {
        let (w, h) = (parent.width(), parent.height());
        BoxRect::new(
            parent.x0 + self.x0 * w,
            parent.y0 + self.y0 * h,
            parent.x0 + self.x1 * w,
            parent.y0 + self.y1 * h,
        )
    }

    /// The two halves of a box, split across its longer side.
    pub fn halves(width: f64, height: f64) -> [RelBox; 2] {
        if width >= height {
            [
                RelBox {
                    x0: 0.0,
                    y0: 0.0,
                    x1: 0.5,
                    y1: 1.0,
                },
                RelBox {
                    x0: 0.5,
                    y0: 0.0,
                    x1: 1.0,
                    y1: 1.0,
                },
            ]
        } else {
            [
                RelBox {
                    x0: 0.0,
                    y0: 0.0,
                    x1: 1.0,
                    y1: 0.5,
                },
                RelBox {
                    x0: 0.0,
                    y0: 0.5,
                    x1: 1.0,
                    y1: 1.0,
                },
            ]
        }
    }
}

/// Layers 6-9 of a semantic patch: the layer-5 AND splits into two layer-6 ORs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartTemplate {
    pub and: AndParams,
    pub layout: [RelBox; 2],
    pub halves: [TemplateOr; 2],
}

/// Layer-6 OR: alternative layer-7 structures for one half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateOr {
    pub alternatives: Vec<TemplateAnd>,
}

/// Layer-7 AND with two layer-8 ORs over layer-9 terminal templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateAnd {
    pub and: AndParams,
    pub layout: [RelBox; 2],
    pub leaves: [Vec<Vec<f64>>; 2],
}

/// A layer-4 part node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub kind: PartKind,
    pub name: String,
    /// Height/width ratio of the part box.
    pub aspect: f64,
    /// Nominal box width.
    pub scale: f64,
    /// Score of the invisible child, `rho_D`.
    pub invisible_penalty: f64,
    pub children: Vec<Patch>,
}

impl Part {
    /// Best layer-5 child for a pooled feature: `(child index, score)`.
    pub fn best_child(&self, feature: &[f64]) -> Result<(usize, f64)> {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.children.len() {
            let s = score_layer5_child(self, i, Layer5Input::Feature(feature))?;
            if s > best.1 {
                best = (i, s);
            }
        }
        if self.children.is_empty() {
            return Err(Error::Empty("part without layer-5 children"));
        }
        Ok(best)
    }

    pub fn region_at(&self, cx: f64, cy: f64, scale_factor: f64) -> Region {
        Region {
            cx,
            cy,
            scale: self.scale * scale_factor,
            aspect: self.aspect,
        }
    }

    pub fn is_semantic(&self) -> bool {
        self.kind == PartKind::Semantic
    }
}

/// A layer-3 pose/viewpoint node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub name: String,
    pub category: usize,
    pub parts: Vec<Part>,
    pub and: AndParams,
}

impl Pose {
    pub fn semantic_count(&self) -> usize {
        self.parts.iter().filter(|p| p.is_semantic()).count()
    }

    pub fn latent_count(&self) -> usize {
        self.parts.len() - self.semantic_count()
    }

    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.name == name)
    }

    /// Index of the neighbor pair joining parts `i` and `j`, in either order.
    pub fn pair_index(&self, i: usize, j: usize) -> Option<usize> {
        self.and
            .pairs
            .iter()
            .position(|p| (p.a == i && p.b == j) || (p.a == j && p.b == i))
    }

    /// Removes part `i` together with its pairs, reindexing the rest.
    pub fn remove_part(&mut self, i: usize) {
        self.parts.remove(i);
        self.and.pairs.retain(|p| p.a != i && p.b != i);
        for p in &mut self.and.pairs {
            if p.a > i {
                p.a -= 1;
            }
            if p.b > i {
                p.b -= 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub poses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aog {
    pub feature_dim: usize,
    pub categories: Vec<Category>,
    pub poses: Vec<Pose>,
}

impl Aog {
    pub fn new(feature_dim: usize) -> Self {
        Aog {
            feature_dim,
            categories: Vec::new(),
            poses: Vec::new(),
        }
    }

    pub fn add_category(&mut self, name: impl Into<String>) -> usize {
        self.categories.push(Category {
            name: name.into(),
            poses: Vec::new(),
        });
        self.categories.len() - 1
    }

    pub fn add_pose(&mut self, pose: Pose) -> usize {
        let id = self.poses.len();
        self.categories[pose.category].poses.push(id);
        self.poses.push(pose);
        id
    }

    pub fn pose(&self, id: usize) -> Result<&Pose> {
        self.poses.get(id).ok_or(Error::UnknownPose(id))
    }
}
