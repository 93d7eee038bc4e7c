use std::sync::Arc;

use aogqa::geometry::{iou, pairwise_geometry, Region};
use aogqa::inference::parse_pose;
use aogqa::inference::InferenceConfig;
use aogqa::world::archive::{load_world, write_world};
use aogqa::world::generate::{stream, LEARNER_STREAM};
use aogqa::world::{generate_world, Answer, Oracle, Question, RenderOptions, WorldConfig};

fn small() -> WorldConfig {
    WorldConfig {
        pool_size: 20,
        heldout_per_pose: 3,
        ..WorldConfig::default()
    }
}

#[test]
fn full_precision_pools_are_all_relevant() {
    let w = generate_world(&WorldConfig {
        precision: 1.0,
        ..small()
    })
    .unwrap();
    for pool in &w.pools {
        assert!(pool
            .iter()
            .all(|&i| w.scenes[i].relevant && w.scenes[i].truth.is_some()));
    }
}

#[test]
fn same_seed_same_world() {
    let a = generate_world(&small()).unwrap();
    let b = generate_world(&small()).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn relevance_count_matches_precision() {
    let w = generate_world(&WorldConfig {
        precision: 0.6,
        pool_size: 100,
        ..small()
    })
    .unwrap();
    for pool in &w.pools {
        assert_eq!(pool.iter().filter(|&&i| w.scenes[i].relevant).count(), 60);
        assert!(pool
            .iter()
            .all(|&i| w.scenes[i].relevant == w.scenes[i].truth.is_some()));
    }
}

#[test]
fn full_occlusion_hides_every_part() {
    let w = generate_world(&small()).unwrap();
    let mut rng = stream(1, 9);
    let opts = RenderOptions {
        occlusion: 1.0,
        noise: 0.1,
        jitter: 1,
    };
    for p in 0..w.poses.len() {
        let (_, truth) = w.render_scene(p, &opts, &mut rng).unwrap();
        assert!(truth.parts.iter().all(|g| !g.visible));
    }
}

#[test]
fn zero_jitter_reproduces_mean_geometry() {
    let w = generate_world(&small()).unwrap();
    let aog = w.generator_aog().unwrap();
    let mut rng = stream(2, 9);
    let opts = RenderOptions {
        occlusion: 0.0,
        noise: 0.0,
        jitter: 0,
    };
    for p in 0..w.poses.len() {
        let (_, truth) = w.render_scene(p, &opts, &mut rng).unwrap();
        for pair in &aog.poses[p].and.pairs {
            let a = Region::from_box(&truth.parts[pair.a].bbox).unwrap();
            let b = Region::from_box(&truth.parts[pair.b].bbox).unwrap();
            let g = pairwise_geometry(&a, &b).unwrap();
            for k in 0..4 {
                assert!((g[k] - pair.mean_geometry[k]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn generator_model_recovers_noiseless_boxes() {
    let w = generate_world(&small()).unwrap();
    let aog = w.generator_aog().unwrap();
    assert!(aogqa::aog::validate(&aog.to_graph()).is_empty());
    let mut rng = stream(3, 9);
    let exact = RenderOptions {
        occlusion: 0.0,
        noise: 0.0,
        jitter: 0,
    };
    for p in 0..w.poses.len() {
        for _ in 0..3 {
            let (grid, truth) = w.render_scene(p, &exact, &mut rng).unwrap();
            let pg = parse_pose(&aog, p, &grid, None, &InferenceConfig::default()).unwrap();
            for (pp, gt) in pg.parts.iter().zip(&truth.parts) {
                let b = pp.bbox().expect("visible");
                assert!(
                    (iou(&b, &gt.bbox).unwrap() - 1.0).abs() < 1e-12,
                    "{} {:?} {:?}",
                    gt.name,
                    b,
                    gt.bbox
                );
            }
        }
    }
}

#[test]
fn generator_model_localizes_jittered_semantic_parts() {
    let w = generate_world(&small()).unwrap();
    let aog = w.generator_aog().unwrap();
    let mut rng = stream(4, 9);
    let opts = RenderOptions {
        occlusion: 0.0,
        noise: 0.1,
        jitter: 1,
    };
    let (mut hits, mut total) = (0, 0);
    for p in 0..w.poses.len() {
        for _ in 0..10 {
            let (grid, truth) = w.render_scene(p, &opts, &mut rng).unwrap();
            let pg = parse_pose(&aog, p, &grid, None, &InferenceConfig::default()).unwrap();
            for (pp, gt) in pg.parts.iter().zip(&truth.parts) {
                if gt.kind == aogqa::aog::PartKind::Semantic {
                    total += 1;
                    if pp.bbox().is_some_and(|b| iou(&b, &gt.bbox).unwrap() > 0.5) {
                        hits += 1;
                    }
                }
            }
        }
    }
    assert!(hits as f64 >= 0.9 * total as f64, "{hits}/{total}");
}

#[test]
fn oracle_examples() {
    let w = Arc::new(generate_world(&small()).unwrap());
    let mut oracle = Oracle::new(w.clone(), 0.0);
    let scene = w.pools[0]
        .iter()
        .copied()
        .find(|&i| w.scenes[i].relevant)
        .unwrap();
    let truth = w.scenes[scene].truth.clone().unwrap();
    let gt = truth
        .parts
        .iter()
        .find(|p| p.kind == aogqa::aog::PartKind::Semantic)
        .unwrap();
    // shift right by one cell on a 4-wide box: IoU = 9/15 = 0.6
    let mut b = gt.bbox;
    b.x0 += 1.0;
    b.x1 += 1.0;
    assert!((iou(&b, &gt.bbox).unwrap() - 0.6).abs() < 1e-12);
    let q = Question::CheckPart {
        scene,
        part: gt.name.clone(),
        bbox: Some(b),
    };
    assert_eq!(oracle.answer(&q).unwrap(), Answer::YesNo(true));

    let irrelevant = w.pools[0]
        .iter()
        .copied()
        .find(|&i| !w.scenes[i].relevant)
        .unwrap();
    let ex = w.exemplars[0];
    let q5 = Question::CheckSample {
        scene: irrelevant,
        exemplar: ex,
    };
    assert_eq!(oracle.answer(&q5).unwrap(), Answer::YesNo(false));

    let mut liar = Oracle::new(w.clone(), 1.0);
    let mut probes = 0;
    for &s in w.pools[0].iter().chain(&w.pools[1]).chain(&w.heldout) {
        if probes == 50 {
            break;
        }
        let q = Question::CheckSample {
            scene: s,
            exemplar: ex,
        };
        let Answer::YesNo(t) = oracle.answer(&q).unwrap() else {
            panic!()
        };
        assert_eq!(liar.answer(&q).unwrap(), Answer::YesNo(!t));
        probes += 1;
    }
    assert_eq!(probes, 50);
}

#[test]
fn exemplars_run_out_after_the_last_pose() {
    let w = Arc::new(generate_world(&small()).unwrap());
    let mut oracle = Oracle::new(w.clone(), 0.0);
    let q = |k| Question::Exemplar {
        category: 1,
        known_poses: k,
    };
    let Answer::Exemplar(Some(e)) = oracle.answer(&q(1)).unwrap() else {
        panic!()
    };
    assert_eq!(
        w.scenes[e.scene].truth.as_ref().unwrap().pose,
        w.pose(1, 1).unwrap()
    );
    assert_eq!(e.boxes.len(), 2);
    assert_eq!(oracle.answer(&q(2)).unwrap(), Answer::Exemplar(None));
}

#[test]
fn archive_round_trip() {
    let w = generate_world(&small()).unwrap();
    let dir = std::env::temp_dir().join(format!("aogqa-archive-{}", std::process::id()));
    write_world(&w, &dir).unwrap();
    let back = load_world(&dir).unwrap();
    assert_eq!(back.scenes.len(), w.scenes.len());
    assert_eq!(back.scenes[5].grid.data(), w.scenes[5].grid.data());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn learner_stream_is_independent_of_world_stream() {
    use rand::Rng;
    let mut a = stream(7, LEARNER_STREAM);
    let mut b = stream(7, 1);
    let x: u64 = a.random();
    let y: u64 = b.random();
    assert_ne!(x, y);
}
