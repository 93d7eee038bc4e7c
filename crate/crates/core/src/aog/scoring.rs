//! Node scoring functions: terminals, OR selection, pairwise deformation,
//! layer-5 patch appearance, AND composition, and background calibration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pairwise_geometry, squared_distance, Geometry, Region};

use super::model::{Part, PatchAppearance};

/// Deformation score returned for two children occupying the same region.
/// Any AND containing it scores [`INFEASIBLE`].
pub const SAME_REGION: f64 = f64::INFINITY;

/// Score of an assignment that contains a [`SAME_REGION`] deformation.
pub const INFEASIBLE: f64 = f64::NEG_INFINITY;

/// Affine normalization `w * x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub w: f64,
    pub b: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { w: 1.0, b: 0.0 };

    pub fn apply(&self, x: f64) -> f64 {
        self.w * x + self.b
    }
}

impl Default for Affine {
    fn default() -> Self {
        Affine::IDENTITY
    }
}

/// A neighboring child pair of an AND node, by child index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub a: usize,
    pub b: usize,
    /// Non-positive, so residuals penalize.
    pub weight: f64,
    pub mean_geometry: Geometry,
}

/// Scoring parameters of an AND node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndParams {
    pub pairs: Vec<NeighborPair>,
    /// Deformation score used when either child of a pair is undetected.
    pub undetected_penalty: f64,
    pub norm: Affine,
    pub has_global_appearance: bool,
}

impl AndParams {
    pub fn new(undetected_penalty: f64) -> Self {
        AndParams {
            pairs: Vec::new(),
            undetected_penalty,
            norm: Affine::IDENTITY,
            has_global_appearance: false,
        }
    }
}

/// A scored child of an AND node. `region` is `None` when the child is undetected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildEval {
    pub score: f64,
    pub detected: bool,
    pub region: Option<Region>,
}

impl ChildEval {
    pub fn detected(score: f64, region: Region) -> Self {
        ChildEval {
            score,
            detected: true,
            region: Some(region),
        }
    }

    pub fn undetected(score: f64) -> Self {
        ChildEval {
            score,
            detected: false,
            region: None,
        }
    }
}

/// Which alternative an OR node activated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrChoice {
    Child(usize),
    Invisible,
}

pub fn score_terminal(template: &[f64], feature: &[f64]) -> Result<f64> {
    if template.len() != feature.len() {
        return Err(Error::DimensionMismatch {
            expected: template.len(),
            got: feature.len(),
        });
    }
    Ok(template.iter().zip(feature).map(|(w, x)| w * x).sum())
}

/// Max over the visible child scores and the invisible penalty. Ties keep the
/// lowest child index; the invisible child wins only strictly.
pub fn score_or(child_scores: &[f64], invisible_penalty: Option<f64>) -> Result<(f64, OrChoice)> {
    let mut best: Option<(f64, OrChoice)> = None;
    for (i, &s) in child_scores.iter().enumerate() {
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, OrChoice::Child(i)));
        }
    }
    if let Some(p) = invisible_penalty {
        if best.is_none_or(|(b, _)| p > b) {
            best = Some((p, OrChoice::Invisible));
        }
    }
    best.ok_or(Error::Empty(
        "OR node has neither children nor an invisible penalty",
    ))
}

/// Deformation between two sibling regions: `rho` when either is missing,
/// [`SAME_REGION`] when they coincide, else the squared residual to the mean geometry.
pub fn score_deformation(
    mean_geometry: &Geometry,
    rho: f64,
    region_a: Option<&Region>,
    region_b: Option<&Region>,
) -> f64 {
    let (Some(a), Some(b)) = (region_a, region_b) else {
        return rho;
    };
    if a.same_placement(b) {
        return SAME_REGION;
    }
    match pairwise_geometry(a, b) {
        Ok(g) => squared_distance(mean_geometry, &g),
        // concentric regions of different scale have no direction
        Err(_) => SAME_REGION,
    }
}

/// Input for scoring one layer-5 child of a part.
#[derive(Debug, Clone, Copy)]
pub enum Layer5Input<'a> {
    Feature(&'a [f64]),
    Margin(f64),
    Invisible,
}

/// `w_D |mean - x|^2 + b_D` for latent children, `w_D * margin + b_D` for a
/// visible semantic child, and the part's invisible penalty otherwise.
pub fn score_layer5_child(part: &Part, child: usize, input: Layer5Input<'_>) -> Result<f64> {
    let patch = part
        .children
        .get(child)
        .ok_or_else(|| Error::KindMismatch(format!("part {} has no child {child}", part.name)))?;
    match (&patch.appearance, input) {
        (_, Layer5Input::Invisible) => Ok(part.invisible_penalty),
        (PatchAppearance::Latent { mean }, Layer5Input::Feature(x)) => {
            if x.len() != mean.len() {
                return Err(Error::DimensionMismatch {
                    expected: mean.len(),
                    got: x.len(),
                });
            }
            Ok(patch.norm.apply(squared_distance(mean, x)))
        }
        (PatchAppearance::Latent { .. }, Layer5Input::Margin(_)) => Err(Error::KindMismatch(
            "latent child scored from a classifier margin".into(),
        )),
        (PatchAppearance::Semantic { classifier }, Layer5Input::Feature(x)) => {
            Ok(patch.norm.apply(classifier.margin(x)?))
        }
        (PatchAppearance::Semantic { .. }, Layer5Input::Margin(m)) => Ok(patch.norm.apply(m)),
    }
}

/// `w_A [S_app + sum child scores + sum_pairs w_pair * S(pair)] + b_A`.
pub fn score_and(params: &AndParams, children: &[ChildEval]) -> Result<f64> {
    score_and_with_appearance(params, 0.0, children)
}

pub fn score_and_with_appearance(
    params: &AndParams,
    appearance: f64,
    children: &[ChildEval],
) -> Result<f64> {
    let mut total = if params.has_global_appearance {
        appearance
    } else {
        0.0
    };
    for c in children {
        total += c.score;
    }
    for pair in &params.pairs {
        let (a, b) = (&children[pair.a], &children[pair.b]);
        for (i, c) in [(pair.a, a), (pair.b, b)] {
            if c.detected && c.region.is_none() {
                return Err(Error::MissingRegion(i));
            }
        }
        let d = score_deformation(
            &pair.mean_geometry,
            params.undetected_penalty,
            a.region.as_ref().filter(|_| a.detected),
            b.region.as_ref().filter(|_| b.detected),
        );
        if d == SAME_REGION {
            return Ok(INFEASIBLE);
        }
        total += pair.weight * d;
    }
    Ok(params.norm.apply(total))
}

/// Population mean and standard deviation.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `(1/sigma, -mu/sigma)` so the transformed samples have zero mean and unit variance.
pub fn calibrate_normalization(raw_background_scores: &[f64]) -> Result<Affine> {
    if raw_background_scores.len() < 2 {
        return Err(Error::Empty("calibration needs at least two samples"));
    }
    let (mu, sigma) = mean_std(raw_background_scores);
    if !(sigma > 1e-12 * mu.abs().max(1.0)) {
        return Err(Error::ZeroVariance);
    }
    Ok(Affine {
        w: 1.0 / sigma,
        b: -mu / sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aog::model::{LinearClassifier, PartKind, Patch};
    use proptest::prelude::*;

    fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += a[i] * b[i];
        }
        s
    }

    #[test]
    fn terminal_examples() {
        assert_eq!(score_terminal(&[1.0, -2.0], &[3.0, 1.0]).unwrap(), 1.0);
        assert_eq!(score_terminal(&[0.0, 0.0], &[7.0, -1.0]).unwrap(), 0.0);
        assert!(score_terminal(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn terminal_matches_naive_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..20);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert!((score_terminal(&a, &b).unwrap() - naive_dot(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn or_examples() {
        assert_eq!(
            score_or(&[0.2, 0.7, -0.1], None).unwrap(),
            (0.7, OrChoice::Child(1))
        );
        assert_eq!(
            score_or(&[-5.0, -3.0], Some(-1.0)).unwrap(),
            (-1.0, OrChoice::Invisible)
        );
        assert_eq!(score_or(&[0.4], None).unwrap(), (0.4, OrChoice::Child(0)));
        assert!(score_or(&[], None).is_err());
        assert_eq!(
            score_or(&[], Some(2.0)).unwrap(),
            (2.0, OrChoice::Invisible)
        );
    }

    fn r(x: f64, y: f64) -> Region {
        Region::new(x, y, 4.0, 1.0).unwrap()
    }

    #[test]
    fn deformation_examples() {
        let (a, b) = (r(0.0, 0.0), r(3.0, 4.0));
        let mean = pairwise_geometry(&a, &b).unwrap();
        assert_eq!(score_deformation(&mean, 0.7, Some(&a), Some(&b)), 0.0);
        assert_eq!(score_deformation(&mean, 0.7, None, Some(&b)), 0.7);
        assert_eq!(score_deformation(&mean, 0.7, Some(&a), None), 0.7);
        assert_eq!(
            score_deformation(&mean, 0.7, Some(&a), Some(&a)),
            SAME_REGION
        );
    }

    fn latent_part(mean: Vec<f64>, norm: Affine, rho: f64) -> Part {
        Part {
            kind: PartKind::Latent,
            name: "latent-0".into(),
            aspect: 1.0,
            scale: 4.0,
            invisible_penalty: rho,
            children: vec![Patch {
                appearance: PatchAppearance::Latent { mean },
                norm,
                template: None,
            }],
        }
    }

    #[test]
    fn layer5_examples() {
        let p = latent_part(vec![1.0, 2.0], Affine { w: -0.5, b: 0.25 }, -1.0);
        assert_eq!(
            score_layer5_child(&p, 0, Layer5Input::Feature(&[1.0, 2.0])).unwrap(),
            0.25
        );
        assert_eq!(
            score_layer5_child(&p, 0, Layer5Input::Invisible).unwrap(),
            -1.0
        );
        assert!(score_layer5_child(&p, 0, Layer5Input::Margin(1.0)).is_err());
        assert!(score_layer5_child(&p, 1, Layer5Input::Invisible).is_err());

        let s = Part {
            kind: PartKind::Semantic,
            name: "head".into(),
            aspect: 0.75,
            scale: 4.0,
            invisible_penalty: 0.9,
            children: vec![Patch {
                appearance: PatchAppearance::Semantic {
                    classifier: LinearClassifier {
                        weights: vec![1.0, 0.0],
                        bias: 0.0,
                    },
                },
                norm: Affine { w: 0.5, b: -0.3 },
                template: None,
            }],
        };
        let v = score_layer5_child(&s, 0, Layer5Input::Margin(2.0)).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
        assert_eq!(
            score_layer5_child(&s, 0, Layer5Input::Invisible).unwrap(),
            0.9
        );
        let v = score_layer5_child(&s, 0, Layer5Input::Feature(&[2.0, 5.0])).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
    }

    fn pose_params(pairs: Vec<NeighborPair>, norm: Affine) -> AndParams {
        AndParams {
            pairs,
            undetected_penalty: 1.5,
            norm,
            has_global_appearance: false,
        }
    }

    #[test]
    fn and_examples() {
        let (a, b) = (r(0.0, 0.0), r(6.0, 0.0));
        let mean = pairwise_geometry(&a, &b).unwrap();
        let params = pose_params(
            vec![NeighborPair {
                a: 0,
                b: 1,
                weight: -2.0,
                mean_geometry: mean,
            }],
            Affine { w: 0.5, b: 0.1 },
        );
        let kids = [ChildEval::detected(1.0, a), ChildEval::detected(2.0, b)];
        assert!((score_and(&params, &kids).unwrap() - (0.5 * 3.0 + 0.1)).abs() < 1e-15);

        let same = [ChildEval::detected(1.0, a), ChildEval::detected(2.0, a)];
        assert_eq!(score_and(&params, &same).unwrap(), INFEASIBLE);

        let missing = [
            ChildEval {
                score: 1.0,
                detected: true,
                region: None,
            },
            ChildEval::detected(2.0, b),
        ];
        assert!(matches!(
            score_and(&params, &missing),
            Err(Error::MissingRegion(0))
        ));

        let one_missing = [ChildEval::undetected(-0.5), ChildEval::detected(2.0, b)];
        let v = score_and(&params, &one_missing).unwrap();
        assert!((v - (0.5 * (1.5 - 2.0 * 1.5) + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn and_matches_term_by_term_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let regions: Vec<Region> = (0..3)
                .map(|i| {
                    Region::new(
                        rng.random_range(0.0..20.0) + 30.0 * i as f64,
                        rng.random_range(0.0..20.0),
                        rng.random_range(2.0..6.0),
                        1.0,
                    )
                    .unwrap()
                })
                .collect();
            let scores: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut pairs = Vec::new();
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                let mut g = [0.0; 4];
                for v in g.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
                pairs.push(NeighborPair {
                    a,
                    b,
                    weight: -rng.random_range(0.0..3.0),
                    mean_geometry: g,
                });
            }
            let norm = Affine {
                w: rng.random_range(0.1..2.0),
                b: rng.random_range(-1.0..1.0),
            };
            let params = pose_params(pairs.clone(), norm);
            let kids: Vec<ChildEval> = scores
                .iter()
                .zip(&regions)
                .map(|(&s, &r)| ChildEval::detected(s, r))
                .collect();

            // independent re-derivation
            let mut expect = scores[0] + scores[1] + scores[2];
            for p in &pairs {
                let ra = regions[p.a];
                let rb = regions[p.b];
                let dx = ra.cx - rb.cx;
                let dy = ra.cy - rb.cy;
                let d = (dx * dx + dy * dy).sqrt();
                let obs = [
                    (ra.scale / rb.scale).ln(),
                    dx / d,
                    dy / d,
                    ((ra.scale + rb.scale) / 2.0 / d).ln(),
                ];
                let mut res = 0.0;
                for k in 0..4 {
                    res += (p.mean_geometry[k] - obs[k]).powi(2);
                }
                expect += p.weight * res;
            }
            expect = norm.w * expect + norm.b;
            assert!((score_and(&params, &kids).unwrap() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn calibration_examples() {
        // mean 2, population std 4
        let a = calibrate_normalization(&[-2.0, 6.0]).unwrap();
        assert_eq!((a.w, a.b), (0.25, -0.5));
        let std = [-1.0, 1.0, -1.0, 1.0];
        let a = calibrate_normalization(&std).unwrap();
        assert!((a.w - 1.0).abs() < 1e-12 && a.b.abs() < 1e-12);
        assert!(matches!(
            calibrate_normalization(&[3.0, 3.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
        assert!(calibrate_normalization(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn or_dominates_inputs(xs in proptest::collection::vec(-10.0..10.0f64, 1..8), pen in proptest::option::of(-10.0..10.0f64)) {
            let (best, choice) = score_or(&xs, pen).unwrap();
            prop_assert!(xs.iter().all(|&x| best >= x));
            if let Some(p) = pen { prop_assert!(best >= p); }
            match choice {
                OrChoice::Child(i) => prop_assert_eq!(best, xs[i]),
                OrChoice::Invisible => prop_assert_eq!(Some(best), pen),
            }
        }

        #[test]
        fn deformation_nonnegative_zero_at_mean(ax in 0.0..20.0f64, ay in 0.0..20.0f64, bx in 0.0..20.0f64, by in 0.0..20.0f64, mean in proptest::array::uniform4(-2.0..2.0f64)) {
            let (a, b) = (r(ax, ay), r(bx, by));
            prop_assume!((ax - bx).abs() + (ay - by).abs() > 1e-6);
            prop_assert!(score_deformation(&mean, 0.3, Some(&a), Some(&b)) >= 0.0);
            let g = pairwise_geometry(&a, &b).unwrap();
            prop_assert_eq!(score_deformation(&g, 0.3, Some(&a), Some(&b)), 0.0);
        }

        #[test]
        fn calibration_standardizes_own_input(xs in proptest::collection::vec(-100.0..100.0f64, 2..50)) {
            let (_, s) = mean_std(&xs);
            prop_assume!(s > 1e-3);
            let a = calibrate_normalization(&xs).unwrap();
            let t: Vec<f64> = xs.iter().map(|&x| a.apply(x)).collect();
            let (m, sd) = mean_std(&t);
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((sd * sd - 1.0).abs() < 1e-9);
        }

        #[test]
        fn and_monotone_in_residuals(extra in 0.0..3.0f64, shift in 0.1..3.0f64, w in -3.0..0.0f64) {
            // moving a child away from the mean geometry never raises the score
            let (a, b) = (r(0.0, 0.0), r(6.0, 0.0));
            let mean = pairwise_geometry(&a, &b).unwrap();
            let params = pose_params(vec![NeighborPair { a: 0, b: 1, weight: w, mean_geometry: mean }], Affine::IDENTITY);
            let near = score_and(&params, &[ChildEval::detected(1.0, a), ChildEval::detected(1.0, b)]).unwrap();
            let far = score_and(&params, &[ChildEval::detected(1.0, a), ChildEval::detected(1.0, r(6.0 + shift, extra))]).unwrap();
            prop_assert!(far <= near + 1e-12);

            // larger latent appearance residual never raises the child score
            let p = latent_part(vec![0.0, 0.0], Affine { w: -1.0, b: 0.0 }, 0.0);
            let s0 = score_layer5_child(&p, 0, Layer5Input::Feature(&[extra, 0.0])).unwrap();
            let s1 = score_layer5_child(&p, 0, Layer5Input::Feature(&[extra + shift, 0.0])).unwrap();
            prop_assert!(s1 <= s0);
        }
    }
}
