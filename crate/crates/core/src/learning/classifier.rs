//! Linear hinge-loss classifier for semantic parts.

use crate::aog::model::LinearClassifier;
use crate::error::{Error, Result};

pub const EPOCHS: usize = 200;
pub const STEP: f64 = 0.1;
pub const L2: f64 = 1e-3;

/// Hinge-loss SGD with a fixed visiting order (positives and negatives interleaved,
/// the smaller class cycled), step `STEP / sqrt(epoch)` and L2 weight `L2`.
pub fn train_semantic_classifier(
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
) -> Result<LinearClassifier> {
    if positives.is_empty() {
        return Err(Error::Empty("classifier needs at least one positive"));
    }
    if negatives.is_empty() {
        return Err(Error::Empty("classifier needs at least one negative"));
    }
    let dim = positives[0].len();
    for x in positives.iter().chain(negatives) {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
    }
    let first = &positives[0];
    if positives.iter().chain(negatives).all(|x| x == first) {
        return Err(Error::Degenerate("all training features are identical"));
    }

    // both classes are visited equally often: the smaller one is cycled
    let n = positives.len().max(negatives.len());
    let mut order: Vec<(&[f64], f64)> = Vec::with_capacity(2 * n);
    for k in 0..n {
        order.push((&positives[k % positives.len()], 1.0));
        order.push((&negatives[k % negatives.len()], -1.0));
    }

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for epoch in 1..=EPOCHS {
        let eta = STEP / (epoch as f64).sqrt();
        for &(x, y) in &order {
            let m: f64 = w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
            let shrink = 1.0 - eta * L2;
            if y * m < 1.0 {
                for (wi, xi) in w.iter_mut().zip(x) {
                    *wi = *wi * shrink + eta * y * xi;
                }
                b += eta * y;
            } else {
                for wi in w.iter_mut() {
                    *wi *= shrink;
                }
            }
        }
    }
    Ok(LinearClassifier {
        weights: w,
        bias: b,
    })
}

/// Mean hinge loss `max(0, 1 - y m)` over a labeled set.
pub fn hinge_loss(
    c: &LinearClassifier,
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
) -> Result<f64> {
    let mut s = 0.0;
    for x in positives {
        s += (1.0 - c.margin(x)?).max(0.0);
    }
    for x in negatives {
        s += (1.0 + c.margin(x)?).max(0.0);
    }
    Ok(s / (positives.len() + negatives.len()).max(1) as f64)
}
