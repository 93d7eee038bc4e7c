use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub seed: u64,
    pub categories: usize,
    pub poses_per_category: usize,
    pub latent_parts: usize,
    pub semantic_parts: usize,
    /// Appearance channels; pooled features carry one more slot for the box ratio.
    pub channels: usize,
    pub grid: usize,
    /// Scenes returned per category keyword.
    pub pool_size: usize,
    /// Fraction of relevant scenes in each keyword pool.
    pub precision: f64,
    pub occlusion: f64,
    /// Standard deviation of the noise added to object cells.
    pub noise: f64,
    pub oracle_error: f64,
    /// Maximum per-part displacement in cells.
    pub jitter: usize,
    pub heldout_per_pose: usize,
    pub part_width: usize,
    /// Distance between neighbouring part slots on the 3x3 layout lattice.
    pub lattice_step: usize,
    pub semantic_aspect: f64,
    pub latent_aspect: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 7,
            categories: 2,
            poses_per_category: 2,
            latent_parts: 3,
            semantic_parts: 2,
            channels: 12,
            grid: 24,
            pool_size: 60,
            precision: 0.7,
            occlusion: 0.0,
            noise: 0.1,
            oracle_error: 0.0,
            jitter: 1,
            heldout_per_pose: 15,
            part_width: 4,
            lattice_step: 6,
            semantic_aspect: 0.75,
            latent_aspect: 1.0,
        }
    }
}

impl WorldConfig {
    pub fn feature_dim(&self) -> usize {
        self.channels + 1
    }

    pub fn parts_per_pose(&self) -> usize {
        self.latent_parts + self.semantic_parts
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        for (name, r) in [
            ("precision", self.precision),
            ("occlusion", self.occlusion),
            ("oracle_error", self.oracle_error),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.precision <= 0.0 {
            return bad("precision must be positive");
        }
        if !(self.noise >= 0.0) {
            return bad("noise must be non-negative");
        }
        if self.categories == 0 || self.poses_per_category == 0 {
            return bad("need at least one category and one pose");
        }
        if self.parts_per_pose() == 0 || self.parts_per_pose() > 9 {
            return bad("parts per pose must be between 1 and 9 (3x3 layout lattice)");
        }
        if self.channels == 0 || self.part_width == 0 {
            return bad("channels and part width must be positive");
        }
        if !(self.semantic_aspect > 0.0 && self.latent_aspect > 0.0) {
            return bad("aspect ratios must be positive");
        }
        let tallest = (self.part_width as f64 * self.semantic_aspect.max(self.latent_aspect))
            .round() as usize;
        let extent = 2 * (self.lattice_step + self.jitter) + self.part_width.max(tallest);
        if extent > self.grid {
            return bad("grid too small for the part layout");
        }
        if self.part_width > self.lattice_step {
            return bad("parts would overlap on the layout lattice");
        }
        Ok(())
    }
}
