//! Layers 6-9 of a part: binary spatial splits with clustered alternatives.

use crate::aog::model::{PartTemplate, RelBox, TemplateAnd, TemplateOr};
use crate::aog::scoring::{AndParams, NeighborPair};
use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::geometry::{pairwise_geometry, squared_distance, BoxRect, Region};

/// Alternatives per OR node.
pub const MAX_ALTERNATIVES: usize = 3;
/// A split into one more cluster is kept only when it cuts the within-cluster
/// sum of squares to at most this fraction.
pub const SPLIT_GAIN: f64 = 0.25;
const KMEANS_ROUNDS: usize = 50;

/// Deterministic k-means: farthest-point seeding from the first sample, then
/// Lloyd rounds. Returns the cluster label of every sample.
pub fn kmeans(xs: &[Vec<f64>], k: usize) -> Vec<usize> {
    if xs.is_empty() || k == 0 {
        return vec![0; xs.len()];
    }
    let mut centers = vec![xs[0].clone()];
    while centers.len() < k.min(xs.len()) {
        let far = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                (
                    i,
                    centers
                        .iter()
                        .map(|c| squared_distance(c, x))
                        .fold(f64::INFINITY, f64::min),
                )
            })
            .fold(
                (0, -1.0),
                |best, (i, d)| if d > best.1 { (i, d) } else { best },
            );
        centers.push(xs[far.0].clone());
    }
    let mut labels = vec![0; xs.len()];
    for _ in 0..KMEANS_ROUNDS {
        let mut changed = false;
        for (i, x) in xs.iter().enumerate() {
            let mut best = (0, f64::INFINITY);
            for (c, m) in centers.iter().enumerate() {
                let d = squared_distance(m, x);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if labels[i] != best.0 {
                labels[i] = best.0;
                changed = true;
            }
        }
        for (c, m) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = xs
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(x, _)| x)
                .collect();
            if !members.is_empty() {
                *m = mean(&members);
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

fn mean(xs: &[&Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; xs[0].len()];
    for x in xs {
        for (a, v) in m.iter_mut().zip(x.iter()) {
            *a += v;
        }
    }
    for a in m.iter_mut() {
        *a /= xs.len() as f64;
    }
    m
}

fn within_ss(xs: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = xs
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(x, _)| x)
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = mean(&members);
        total += members.iter().map(|x| squared_distance(&m, x)).sum::<f64>();
    }
    total
}

/// Clusters features into at most [`MAX_ALTERNATIVES`] groups. A further split
/// needs at least two members per cluster and a [`SPLIT_GAIN`] reduction of the
/// within-cluster sum of squares. Labels are renumbered by first appearance.
pub fn cluster_features(xs: &[Vec<f64>]) -> Vec<usize> {
    let mut labels = vec![0; xs.len()];
    let mut ss = within_ss(xs, &labels, 1);
    for k in 2..=MAX_ALTERNATIVES {
        if ss <= 1e-12 {
            break;
        }
        let cand = kmeans(xs, k);
        let sizes_ok = (0..k).all(|c| cand.iter().filter(|&&l| l == c).count() >= 2);
        let cand_ss = within_ss(xs, &cand, k);
        if !sizes_ok || cand_ss > SPLIT_GAIN * ss {
            break;
        }
        labels = cand;
        ss = cand_ss;
    }
    let mut order: Vec<usize> = Vec::new();
    for &l in &labels {
        if !order.contains(&l) {
            order.push(l);
        }
    }
    labels
        .iter()
        .map(|l| order.iter().position(|o| o == l).expect("seen"))
        .collect()
}

/// Terminal whose dot product with a pooled feature `x` is
/// `2 mu . x - |mu|^2`, i.e. `|x|^2 - |x - mu|^2`. The constant rides on the
/// ratio slot, which is the same for every aligned box.
pub fn terminal_template(mu: &[f64]) -> Vec<f64> {
    let n = mu.len();
    let ratio = mu[n - 1];
    let norm: f64 = mu[..n - 1].iter().map(|v| v * v).sum();
    let mut t: Vec<f64> = mu[..n - 1].iter().map(|v| 2.0 * v).collect();
    t.push(if ratio > 0.0 { -norm / ratio } else { 0.0 });
    t
}

fn split_params(layout: &[RelBox; 2]) -> Result<AndParams> {
    let unit = BoxRect::new(0.0, 0.0, 1.0, 1.0);
    let a = Region::from_box(&layout[0].place(&unit))?;
    let b = Region::from_box(&layout[1].place(&unit))?;
    let mut and = AndParams::new(0.0);
    and.pairs.push(NeighborPair {
        a: 0,
        b: 1,
        weight: -1.0,
        mean_geometry: pairwise_geometry(&a, &b)?,
    });
    Ok(and)
}

fn leaves(xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let labels = cluster_features(xs);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|c| {
            let members: Vec<&Vec<f64>> = xs
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(x, _)| x)
                .collect();
            terminal_template(&mean(&members))
        })
        .collect()
}

/// Half boxes of a part box, in layout order.
pub fn half_boxes(part_box: &BoxRect) -> [BoxRect; 2] {
    let layout = RelBox::halves(part_box.width(), part_box.height());
    [layout[0].place(part_box), layout[1].place(part_box)]
}

/// Builds layers 6-9 from aligned part boxes: the box splits into two halves
/// (layer-6 ORs), half features are clustered into layer-7 alternatives, each
/// alternative splits its half again, and the quarter features of its members
/// are clustered into layer-9 terminals.
pub fn learn_part_template(patches: &[(&FeatureGrid, BoxRect)]) -> Result<PartTemplate> {
    if patches.len() < 2 {
        return Err(Error::Empty("a part template needs at least two patches"));
    }
    let (w, h) = (patches[0].1.width(), patches[0].1.height());
    let layout = RelBox::halves(w, h);
    let mut halves = Vec::with_capacity(2);
    for rel in &layout {
        let boxes: Vec<BoxRect> = patches.iter().map(|(_, b)| rel.place(b)).collect();
        let feats: Vec<Vec<f64>> = patches
            .iter()
            .zip(&boxes)
            .map(|((g, _), b)| g.pooled(b))
            .collect();
        let labels = cluster_features(&feats);
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let sub_layout = RelBox::halves(boxes[0].width(), boxes[0].height());
        let mut alternatives = Vec::with_capacity(k);
        for c in 0..k {
            let mut quarter_feats: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
            for (i, &l) in labels.iter().enumerate() {
                if l != c {
                    continue;
                }
                for (q, sub) in sub_layout.iter().enumerate() {
                    quarter_feats[q].push(patches[i].0.pooled(&sub.place(&boxes[i])));
                }
            }
            alternatives.push(TemplateAnd {
                and: split_params(&sub_layout)?,
                layout: sub_layout,
                leaves: [leaves(&quarter_feats[0]), leaves(&quarter_feats[1])],
            });
        }
        halves.push(TemplateOr { alternatives });
    }
    let [h0, h1]: [TemplateOr; 2] = halves.try_into().expect("two halves");
    Ok(PartTemplate {
        and: split_params(&layout)?,
        layout,
        halves: [h0, h1],
    })
}
