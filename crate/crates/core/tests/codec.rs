use aogqa::aog::codec::{graph_from_json, graph_to_json};
use aogqa::aog::scoring::NeighborPair;
use aogqa::aog::{Affine, AndParams, Aog, Part, PartKind, Patch, PatchAppearance, Pose};

fn max_abs_diff(a: &serde_json::Value, b: &serde_json::Value) -> f64 {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs(),
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len());
            x.iter()
                .zip(y)
                .map(|(p, q)| max_abs_diff(p, q))
                .fold(0.0, f64::max)
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.len(), y.len());
            x.iter()
                .map(|(k, v)| max_abs_diff(v, &y[k]))
                .fold(0.0, f64::max)
        }
        _ => {
            assert_eq!(a, b);
            0.0
        }
    }
}

fn awkward_aog() -> Aog {
    let mut aog = Aog::new(2);
    let c = aog.add_category("mug");
    let part = |i: usize| Part {
        kind: PartKind::Latent,
        name: format!("latent-{i}"),
        aspect: 1.0 / 3.0,
        scale: std::f64::consts::PI,
        invisible_penalty: -1e-300 * i as f64 - 0.1,
        children: vec![Patch {
            appearance: PatchAppearance::Latent {
                mean: vec![1.0 / 7.0, 2.0_f64.sqrt()],
            },
            norm: Affine {
                w: -1.0 / 9.0,
                b: 1e17,
            },
            template: None,
        }],
    };
    let mut and = AndParams::new(-0.123456789012345);
    and.pairs.push(NeighborPair {
        a: 0,
        b: 1,
        weight: -1e-10,
        mean_geometry: [0.1, 0.2, 0.3, 0.4],
    });
    aog.add_pose(Pose {
        name: "side".into(),
        category: c,
        parts: vec![part(0), part(1)],
        and,
    });
    aog
}

#[test]
fn json_round_trip_is_lossless() {
    let aog = awkward_aog();
    let text = aog.to_json().unwrap();
    let back = Aog::from_json(&text).unwrap();
    let a = serde_json::to_value(aog.to_graph()).unwrap();
    let b = serde_json::to_value(back.to_graph()).unwrap();
    assert!(max_abs_diff(&a, &b) <= 1e-12);
    assert_eq!(back.to_json().unwrap(), text);
}

#[test]
fn rejects_unknown_version() {
    let text = graph_to_json(&awkward_aog().to_graph()).unwrap();
    let bumped = text.replace("\"version\": 1", "\"version\": 2");
    assert!(graph_from_json(&bumped).is_err());
}
