//! Negative samples for semantic part classifiers.

use crate::error::Result;
use crate::features::FeatureGrid;
use crate::geometry::{iou, BoxRect};
use crate::inference::placements;

/// Negatives overlap a positive by less than this IoU. Windows that half-cover a
/// part would force a needle-thin margin and a classifier that fires on background.
pub const NEGATIVE_MAX_IOU: f64 = 0.1;

/// Ladder placements of a part-shaped box whose IoU with the positive box (and
/// with every box in `keep_clear`) stays below [`NEGATIVE_MAX_IOU`]. Every
/// `stride`-th placement is kept.
pub fn background_negatives(
    grid: &FeatureGrid,
    positive: &BoxRect,
    keep_clear: &[BoxRect],
    stride: usize,
) -> Result<Vec<Vec<f64>>> {
    let aspect = positive.height() / positive.width();
    let mut out = Vec::new();
    let all = placements(positive.width(), aspect, grid.width(), grid.height(), None);
    for r in all.into_iter().step_by(stride.max(1)) {
        let b = r.bbox();
        if iou(&b, positive)? >= NEGATIVE_MAX_IOU {
            continue;
        }
        let mut clear = true;
        for k in keep_clear {
            if iou(&b, k)? >= NEGATIVE_MAX_IOU {
                clear = false;
                break;
            }
        }
        if clear {
            out.push(grid.pooled(&b));
        }
    }
    Ok(out)
}
