use std::net::SocketAddr;
use std::sync::Arc;

use aogqa::geometry::BoxRect;
use aogqa::qa::{run_learning_loop, LearnerConfig};
use aogqa::world::{generate_world, truthful_answer, Answer, Oracle, Question, World, WorldConfig};
use aogqa_service::{Client, ClientError, CreateSession, Mode, Service, Status};

fn world() -> Arc<World> {
    Arc::new(generate_world(&WorldConfig::default()).unwrap())
}

fn start(world: Arc<World>) -> Client {
    let (addr, _) =
        aogqa_service::spawn(Service::new(world), SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
    Client::new(&format!("http://{addr}"))
}

fn live(iterations: usize) -> CreateSession {
    CreateSession {
        mode: Mode::Live,
        config: None,
        iterations: Some(iterations),
        oracle_error: None,
    }
}

fn api_kind(e: ClientError) -> (u16, String) {
    match e {
        ClientError::Api { status, body } => (status.as_u16(), body.kind),
        other => panic!("expected an API error, got {other}"),
    }
}

/// Blocks until a question is pending.
fn next_question(c: &Client, id: u64) -> aogqa_service::PendingQuestion {
    loop {
        if let Some(q) = c.question(id).unwrap() {
            return q;
        }
        assert_ne!(
            c.state(id).unwrap().status,
            Status::Done,
            "session ended without a question"
        );
        std::thread::sleep(std::time::Duration::from_millis(5));
    }
}

#[test]
fn scripted_live_session_matches_oracle_run() {
    let w = world();
    let c = start(w.clone());
    let iterations = 4;
    let s = c.create_session(&live(iterations)).unwrap();
    let state = c
        .drive(s.id, |q| truthful_answer(&w, q).map_err(|e| e.to_string()))
        .unwrap();
    assert_eq!(state.status, Status::Done);
    let live_log = c.events(s.id).unwrap();

    let cfg = LearnerConfig {
        iterations,
        ..LearnerConfig::default()
    };
    let mut oracle = Oracle::new(w.clone(), 0.0);
    let offline = run_learning_loop(w, cfg, &mut oracle).unwrap();
    assert_eq!(live_log, offline.log.to_jsonl().unwrap());

    let transcript = c.transcript(s.id).unwrap();
    assert_eq!(transcript.len(), state.answered);
    let asked: Vec<_> = offline
        .log
        .questions()
        .map(|(q, a)| (q.clone(), a.clone()))
        .collect();
    let answered: Vec<_> = transcript
        .iter()
        .map(|t| (t.question.clone(), t.answer.clone()))
        .collect();
    assert_eq!(answered, asked);
    assert!(transcript
        .windows(2)
        .all(|p| p[0].question_id < p[1].question_id));
}

#[test]
fn oracle_session_never_asks_over_http() {
    let w = world();
    let c = start(w);
    let s = c
        .create_session(&CreateSession {
            mode: Mode::Oracle,
            config: None,
            iterations: Some(0),
            oracle_error: Some(0.0),
        })
        .unwrap();
    assert_eq!(s.mode, Mode::Oracle);
    assert!(c.question(s.id).unwrap().is_none());
    let done = c.wait(s.id, std::time::Duration::from_millis(20)).unwrap();
    assert!(c.question(s.id).unwrap().is_none());
    assert_eq!(done.answered, 0);
    assert_eq!(done.learner.poses.len(), 2);
    assert!(done.learner.cost > 0.0);
}

#[test]
fn pending_question_is_stable_until_answered() {
    let w = world();
    let c = start(w.clone());
    let s = c.create_session(&live(0)).unwrap();
    let q = next_question(&c, s.id);
    assert_eq!(c.question(s.id).unwrap().unwrap(), q);

    let fresh = c.state(s.id).unwrap();
    assert_eq!(fresh.status, Status::AwaitingAnswer);
    assert_eq!(fresh.learner.cost, 0.0);
    assert!(fresh.learner.losses.is_empty());
    assert_eq!(c.state(s.id).unwrap(), fresh);

    let ack = c
        .answer(
            s.id,
            q.question_id,
            truthful_answer(&w, &q.question).unwrap(),
        )
        .unwrap();
    assert_eq!(ack.answered, 1);
    let (status, kind) = api_kind(c.answer(s.id, q.question_id, Answer::Count(2)).unwrap_err());
    assert!(
        matches!(
            (status, kind.as_str()),
            (409, "stale_question") | (409, "no_pending_question")
        ),
        "{status} {kind}"
    );
}

#[test]
fn bad_answers_are_rejected_and_question_stays() {
    let w = world();
    let c = start(w.clone());
    let s = c.create_session(&live(0)).unwrap();
    let mut checked_bounds = false;
    let mut checked_kind = false;
    while !(checked_bounds && checked_kind) {
        let q = next_question(&c, s.id);
        if !checked_kind {
            let wrong = match q.question {
                Question::PartCount { .. } => Answer::YesNo(true),
                _ => Answer::Count(1),
            };
            let (status, kind) = api_kind(c.answer(s.id, q.question_id, wrong).unwrap_err());
            assert_eq!((status, kind.as_str()), (422, "kind_mismatch"));
            assert_eq!(c.question(s.id).unwrap().unwrap(), q);
            checked_kind = true;
        }
        let outside = BoxRect::new(20.0, 20.0, 30.0, 30.0);
        let bad = match &q.question {
            Question::LabelPart { .. } => Some(Answer::Box(Some(outside))),
            Question::Exemplar { category, .. } => {
                Some(Answer::Exemplar(Some(aogqa::world::Exemplar {
                    scene: w.pools[*category][0],
                    boxes: vec![("head".into(), outside)],
                })))
            }
            _ => None,
        };
        if let Some(bad) = bad {
            let (status, kind) = api_kind(c.answer(s.id, q.question_id, bad).unwrap_err());
            assert_eq!((status, kind.as_str()), (422, "out_of_bounds"));
            assert_eq!(c.question(s.id).unwrap().unwrap(), q);
            checked_bounds = true;
        }
        let (status, kind) = api_kind(
            c.answer(
                s.id,
                q.question_id + 1,
                truthful_answer(&w, &q.question).unwrap(),
            )
            .unwrap_err(),
        );
        assert_eq!((status, kind.as_str()), (409, "stale_question"));
        c.answer(
            s.id,
            q.question_id,
            truthful_answer(&w, &q.question).unwrap(),
        )
        .unwrap();
    }
    assert_eq!(
        c.state(s.id).unwrap().answered,
        c.transcript(s.id).unwrap().len()
    );
}

#[test]
fn question_payload_previews_its_scene() {
    let w = world();
    let c = start(w.clone());
    let s = c.create_session(&live(0)).unwrap();
    loop {
        let q = next_question(&c, s.id);
        if let Some(scene) = q.question.scene() {
            let p = &q.render.scenes[0];
            assert_eq!(p.scene, scene);
            assert_eq!(p.heat.len(), p.heat_width * p.heat_height);
            assert!(p.heat_width < p.width);
            break;
        }
        if let Question::Exemplar { category, .. } = q.question {
            assert_eq!(q.render.candidates, w.pools[category]);
        }
        c.answer(
            s.id,
            q.question_id,
            truthful_answer(&w, &q.question).unwrap(),
        )
        .unwrap();
    }
}

#[test]
fn unknown_ids_and_bad_config() {
    let w = world();
    let c = start(w.clone());
    assert_eq!(
        api_kind(c.state(99).unwrap_err()),
        (404, "unknown_session".into())
    );
    assert_eq!(
        api_kind(c.question(99).unwrap_err()),
        (404, "unknown_session".into())
    );
    assert_eq!(
        api_kind(c.scene(usize::MAX).unwrap_err()),
        (404, "unknown_scene".into())
    );
    let bad = CreateSession {
        mode: Mode::Oracle,
        config: None,
        iterations: None,
        oracle_error: Some(2.0),
    };
    assert_eq!(
        api_kind(c.create_session(&bad).unwrap_err()),
        (400, "bad_config".into())
    );
    let s = c.create_session(&live(0)).unwrap();
    assert_eq!(
        api_kind(c.events(s.id).unwrap_err()),
        (409, "not_finished".into())
    );
}

#[test]
fn scene_endpoint_serves_full_grid() {
    let w = world();
    let c = start(w.clone());
    let doc = c.scene(3).unwrap();
    let scene = w.scene(3).unwrap();
    assert_eq!(doc.id, 3);
    assert_eq!(doc.grid.data().len(), scene.grid.data().len());
    assert!(doc
        .grid
        .data()
        .iter()
        .zip(scene.grid.data())
        .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0)));
    let raw: serde_json::Value = reqwest::blocking::get(format!("{}/scenes/3", c.base()))
        .unwrap()
        .json()
        .unwrap();
    assert!(raw.get("truth").is_none());
}
