use proptest::prelude::*;

use aogqa::aog::model::PartKind;
use aogqa::geometry::Region;
use aogqa::inference::{ParseGraph, PartParse};
use aogqa::metrics::{aer, app};
use aogqa::world::{GroundTruth, GtPart};

const NAMES: [(&str, PartKind); 4] = [
    ("head", PartKind::Semantic),
    ("tail", PartKind::Semantic),
    ("wheel", PartKind::Semantic),
    ("latent-0", PartKind::Latent),
];

/// Per part: truth center, predicted offset, whether the truth is visible and whether the prediction is.
type PartDraw = ((u8, u8), (i8, i8), bool, bool);

fn object(draw: &[PartDraw]) -> (ParseGraph, GroundTruth) {
    let mut parts = Vec::new();
    let mut truths = Vec::new();
    for ((name, kind), &((x, y), (dx, dy), seen, found)) in NAMES.iter().zip(draw) {
        let truth = Region::new(4.0 + x as f64, 4.0 + y as f64, 4.0, 1.0).unwrap();
        let pred = Region::new(truth.cx + dx as f64, truth.cy + dy as f64, 4.0, 1.0).unwrap();
        truths.push(GtPart {
            name: name.to_string(),
            kind: *kind,
            bbox: truth.bbox(),
            visible: seen,
        });
        parts.push(PartParse {
            name: name.to_string(),
            kind: *kind,
            region: found.then_some(pred),
            child: found.then_some(0),
            score: 0.0,
            template: None,
        });
    }
    (
        ParseGraph {
            category: 0,
            pose: 0,
            score: 0.0,
            parts,
        },
        GroundTruth {
            category: 0,
            pose: 0,
            parts: truths,
        },
    )
}

fn objects() -> impl Strategy<Value = Vec<Vec<PartDraw>>> {
    let part = (
        (0u8..20, 0u8..20),
        (-3i8..=3, -3i8..=3),
        prop::bool::weighted(0.8),
        prop::bool::weighted(0.8),
    );
    prop::collection::vec(prop::collection::vec(part, NAMES.len()), 1..12)
}

fn split(draws: &[Vec<PartDraw>]) -> (Vec<ParseGraph>, Vec<GroundTruth>) {
    draws.iter().map(|d| object(d)).unzip()
}

proptest! {
    #[test]
    fn app_ignores_object_order(draws in objects(), shift in 0usize..12) {
        let (p, t) = split(&draws);
        let Ok(base) = app(&p, &t) else { return Ok(()) };
        prop_assert!((0.0..=1.0).contains(&base));
        let mut rotated = draws.clone();
        let k = shift % rotated.len();
        rotated.rotate_left(k);
        rotated.reverse();
        let (p2, t2) = split(&rotated);
        prop_assert_eq!(app(&p2, &t2).unwrap(), base);
    }

    #[test]
    fn aer_ignores_part_order(draws in objects()) {
        let (mut p, mut t) = split(&draws);
        let base = aer(&p, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        for (pg, gt) in p.iter_mut().zip(&mut t) {
            pg.parts.reverse();
            gt.parts.rotate_left(1);
        }
        prop_assert_eq!(aer(&p, &t).unwrap(), base);
    }

    #[test]
    fn exact_visible_predictions_explain_everything(centers in prop::collection::vec((0u8..20, 0u8..20), 4 * NAMES.len())) {
        let draws: Vec<Vec<PartDraw>> = centers.chunks(NAMES.len()).map(|c| c.iter().map(|&xy| (xy, (0, 0), true, true)).collect()).collect();
        let (p, t) = split(&draws);
        prop_assert_eq!(app(&p, &t).unwrap(), 1.0);
        prop_assert_eq!(aer(&p, &t).unwrap(), 1.0);
    }
}
