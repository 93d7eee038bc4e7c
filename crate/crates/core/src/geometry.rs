//! Regions, boxes and the pairwise geometric relation between two part regions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in grid units, `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoxRect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BoxRect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn is_valid(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 > self.x0
            && self.y1 > self.y0
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn contains(&self, other: &BoxRect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn intersection_area(&self, other: &BoxRect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Smallest box covering both.
    pub fn union_box(&self, other: &BoxRect) -> BoxRect {
        BoxRect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BoxRect, b: &BoxRect) -> Result<f64> {
    if a.area() <= 0.0 || b.area() <= 0.0 {
        return Err(Error::DegenerateBox);
    }
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// A part placement: center, scale (box width) and the part's height/width ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
    pub aspect: f64,
}

impl Region {
    pub fn new(cx: f64, cy: f64, scale: f64, aspect: f64) -> Result<Self> {
        if !(scale > 0.0 && aspect > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::InvalidRegion(format!(
                "scale {scale} aspect {aspect} at ({cx}, {cy})"
            )));
        }
        Ok(Region {
            cx,
            cy,
            scale,
            aspect,
        })
    }

    /// Region whose derived box is exactly `b`.
    pub fn from_box(b: &BoxRect) -> Result<Self> {
        if !b.is_valid() {
            return Err(Error::DegenerateBox);
        }
        let (cx, cy) = b.center();
        Region::new(cx, cy, b.width(), b.height() / b.width())
    }

    pub fn width(&self) -> f64 {
        self.scale
    }

    pub fn height(&self) -> f64 {
        self.scale * self.aspect
    }

    pub fn bbox(&self) -> BoxRect {
        let hw = 0.5 * self.width();
        let hh = 0.5 * self.height();
        BoxRect::new(self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }

    /// Lexicographic order used for deterministic tie-breaking: row, column, scale.
    pub fn order_key(&self) -> (f64, f64, f64) {
        (self.cy, self.cx, self.scale)
    }

    pub fn same_placement(&self, other: &Region) -> bool {
        self.cx == other.cx && self.cy == other.cy && self.scale == other.scale
    }
}

/// Length of the pairwise geometry vector.
pub const GEOMETRY_DIM: usize = 4;

pub type Geometry = [f64; GEOMETRY_DIM];

/// Relative geometry of `a` with respect to `b`:
/// `(log(s_a/s_b), unit offset a-b (2 comps), log(mean(s_a, s_b) / |p_a - p_b|))`.
pub fn pairwise_geometry(a: &Region, b: &Region) -> Result<Geometry> {
    let dx = a.cx - b.cx;
    let dy = a.cy - b.cy;
    let dist = (dx * dx + dy * dy).sqrt();
    if dist <= 0.0 {
        return Err(Error::CoincidentCenters);
    }
    let mean_scale = 0.5 * (a.scale + b.scale);
    Ok([
        (a.scale / b.scale).ln(),
        dx / dist,
        dy / dist,
        (mean_scale / dist).ln(),
    ])
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
