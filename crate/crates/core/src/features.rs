//! Synthetic feature grids and region feature pooling.
//!
//! A scene is a `channels x height x width` grid. The feature of a region is the
//! mean of the cells whose centers fall inside its box, followed by one extra slot
//! holding the box height/width ratio. Pooling runs in O(channels) through a
//! summed-area table built once per grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxRect;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GridData", into = "GridData")]
pub struct FeatureGrid {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    integral: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridData {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl TryFrom<GridData> for FeatureGrid {
    type Error = Error;

    fn try_from(g: GridData) -> Result<Self> {
        FeatureGrid::from_data(g.channels, g.height, g.width, g.data)
    }
}

impl From<FeatureGrid> for GridData {
    fn from(g: FeatureGrid) -> Self {
        GridData {
            channels: g.channels,
            height: g.height,
            width: g.width,
            data: g.data,
        }
    }
}

impl FeatureGrid {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::from_data(
            channels,
            height,
            width,
            vec![0.0; channels * height * width],
        )
        .expect("sizes agree")
    }

    /// `data` is channel-major: `data[(c * height + y) * width + x]`.
    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::DimensionMismatch {
                expected: channels * height * width,
                got: data.len(),
            });
        }
        let mut grid = FeatureGrid {
            channels,
            height,
            width,
            data,
            integral: Vec::new(),
        };
        grid.rebuild_integral();
        Ok(grid)
    }

    fn rebuild_integral(&mut self) {
        let (h, w) = (self.height, self.width);
        let stride = (h + 1) * (w + 1);
        let mut integral = vec![0.0; self.channels * stride];
        for c in 0..self.channels {
            let base = c * stride;
            for y in 0..h {
                let mut row = 0.0;
                for x in 0..w {
                    row += self.data[(c * h + y) * w + x];
                    integral[base + (y + 1) * (w + 1) + x + 1] =
                        integral[base + y * (w + 1) + x + 1] + row;
                }
            }
        }
        self.integral = integral;
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Length of a pooled feature vector (channels plus the ratio slot).
    pub fn feature_dim(&self) -> usize {
        self.channels + 1
    }

    pub fn is_empty(&self) -> bool {
        self.channels == 0 || self.height == 0 || self.width == 0
    }

    pub fn bounds(&self) -> BoxRect {
        BoxRect::new(0.0, 0.0, self.width as f64, self.height as f64)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn cell(&self, y: usize, x: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, y, x)).collect()
    }

    /// Writes a batch of cells and refreshes the summed-area table once.
    pub fn paint<I>(&mut self, cells: I)
    where
        I: IntoIterator<Item = (usize, usize, Vec<f64>)>,
    {
        for (y, x, v) in cells {
            for (c, value) in v.into_iter().enumerate().take(self.channels) {
                self.data[(c * self.height + y) * self.width + x] = value;
            }
        }
        self.rebuild_integral();
    }

    /// Half-open cell index range whose centers lie in `[lo, hi)`, clamped to `n`.
    fn cell_range(lo: f64, hi: f64, n: usize) -> (usize, usize) {
        let start = (lo - 0.5).ceil().max(0.0);
        let end = (hi - 0.5).ceil().min(n as f64);
        if end > start {
            (start as usize, end as usize)
        } else {
            let mid = (0.5 * (lo + hi) - 0.5).round().clamp(0.0, n as f64 - 1.0) as usize;
            (mid, mid + 1)
        }
    }

    /// Mean channel values over the cells covered by `b`, plus the box height/width ratio.
    pub fn pooled(&self, b: &BoxRect) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.channels + 1);
        self.pooled_into(b, &mut out);
        out
    }

    pub fn pooled_into(&self, b: &BoxRect, out: &mut Vec<f64>) {
        out.clear();
        let (x0, x1) = Self::cell_range(b.x0, b.x1, self.width);
        let (y0, y1) = Self::cell_range(b.y0, b.y1, self.height);
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        let w1 = self.width + 1;
        let stride = (self.height + 1) * w1;
        for c in 0..self.channels {
            let base = c * stride;
            let s = self.integral[base + y1 * w1 + x1]
                - self.integral[base + y0 * w1 + x1]
                - self.integral[base + y1 * w1 + x0]
                + self.integral[base + y0 * w1 + x0];
            out.push(s / n);
        }
        out.push(b.height() / b.width());
    }
}
