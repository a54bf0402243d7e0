use std::path::Path;
use std::sync::Arc;

use acbc_core::io::read_records;
use acbc_core::survey::Bracket;
use acbc_core::{Side, SurveyDesign};
use acbc_service::{router, Service};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const STUDY: &str = "pilot";

fn open(dir: &Path) -> Arc<Service> {
    Arc::new(Service::open(dir, vec![(STUDY.to_string(), SurveyDesign::four_by_three())]).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, key: Option<&str>, body: Option<Value>) -> (StatusCode, Value, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(k) = key {
        req = req.header("Idempotency-Key", k);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let json = serde_json::from_str(&text).unwrap_or(Value::Null);
    (status, json, text)
}

async fn create(app: &Router, seed: u64) -> String {
    let (status, body, _) = call(
        app,
        "POST",
        &format!("/studies/{STUDY}/sessions"),
        None,
        Some(json!({"schemaVersion": 1, "populationTag": "FBO", "seed": seed})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["phase"], "awaitingByo");
    assert_eq!(body["question"]["kind"], "byo");
    body["sessionId"].as_str().unwrap().to_string()
}

async fn answer_byo(app: &Router, sid: &str, levels: &[usize]) -> Value {
    let (status, body, _) = call(
        app,
        "POST",
        &format!("/sessions/{sid}/responses"),
        Some("byo"),
        Some(json!({"schemaVersion": 1, "kind": "byo", "levels": levels})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body
}

fn choice(task: usize, winner: &str) -> Value {
    json!({"schemaVersion": 1, "kind": "choice", "task": task, "winner": winner})
}

/// Answers every remaining task, always picking the profile whose first
/// attribute level is lower (left on ties).
async fn finish(app: &Router, sid: &str, from: usize) -> Value {
    let mut last = Value::Null;
    for task in from..=15 {
        let (_, next, _) = call(app, "GET", &format!("/sessions/{sid}/next"), None, None).await;
        assert_eq!(next["question"]["task"], task);
        let l = next["question"]["left"]["levels"][0].as_u64().unwrap();
        let r = next["question"]["right"]["levels"][0].as_u64().unwrap();
        let w = if r < l { "right" } else { "left" };
        let (status, body, _) = call(
            app,
            "POST",
            &format!("/sessions/{sid}/responses"),
            Some(&format!("t{task}")),
            Some(choice(task, w)),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        last = body;
    }
    last
}

#[tokio::test]
async fn full_session_produces_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path()));
    let sid = create(&app, 7).await;
    let after_byo = answer_byo(&app, &sid, &[1, 1, 0, 1]).await;
    assert_eq!(after_byo["phase"], "inTournament");
    assert_eq!(after_byo["progress"], json!({"answered": 0, "total": 15}));
    assert_eq!(after_byo["question"]["round"], 1);

    let done = finish(&app, &sid, 1).await;
    assert_eq!(done["phase"], "complete");
    assert_eq!(done["summary"]["tasks"], 15);
    assert!(done.get("question").is_none());
    assert_eq!(done["summary"]["byo"]["code"], "A2B2C1D2");

    let (status, _, text) = call(&app, "GET", &format!("/studies/{STUDY}/records.jsonl"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let records = read_records(text.as_bytes(), &SurveyDesign::four_by_three()).unwrap();
    assert_eq!(records.len(), 1);
    let rec = &records[0];
    assert_eq!(rec.id, sid);
    assert_eq!(rec.population_tag, "FBO");
    assert_eq!(rec.seed, Some(7));
    assert_eq!(rec.tasks.len(), 15);

    // Replaying the recorded answers through a fresh bracket gives the same champion.
    let winners: Vec<Side> = rec.tasks.iter().map(|t| t.winner.unwrap()).collect();
    let replayed = Bracket::replay(rec.field.clone(), &winners).unwrap();
    assert_eq!(replayed.champion().unwrap().to_string(), done["summary"]["champion"]["code"]);
    assert!(rec.field.iter().all(|p| p.distance(&rec.byo) <= 2));
}

#[tokio::test]
async fn same_seed_gives_same_field() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path()));
    let a = create(&app, 99).await;
    let b = create(&app, 99).await;
    assert_ne!(a, b);
    let qa = answer_byo(&app, &a, &[0, 0, 0, 0]).await;
    let qb = answer_byo(&app, &b, &[0, 0, 0, 0]).await;
    assert_eq!(qa["question"], qb["question"]);
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (sid, before) = {
        let app = router(open(dir.path()));
        let sid = create(&app, 3).await;
        answer_byo(&app, &sid, &[2, 0, 1, 0]).await;
        for task in 1..=4 {
            let (s, _, _) = call(
                &app,
                "POST",
                &format!("/sessions/{sid}/responses"),
                Some(&format!("t{task}")),
                Some(choice(task, "right")),
            )
            .await;
            assert_eq!(s, StatusCode::OK);
        }
        let (_, before, _) = call(&app, "GET", &format!("/sessions/{sid}/next"), None, None).await;
        (sid, before)
    };
    let app = router(open(dir.path()));
    let (status, after, _) = call(&app, "GET", &format!("/sessions/{sid}/next"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);
    assert_eq!(after["progress"]["answered"], 4);
    assert_eq!(after["question"]["round"], 1);

    // An earlier key still replays after restart.
    let (s, replay, _) = call(
        &app,
        "POST",
        &format!("/sessions/{sid}/responses"),
        Some("t4"),
        Some(choice(4, "right")),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(replay["progress"]["answered"], 4);

    let done = finish(&app, &sid, 5).await;
    assert_eq!(done["phase"], "complete");

    drop(app);
    let app = router(open(dir.path()));
    let (_, _, text) = call(&app, "GET", &format!("/studies/{STUDY}/records.jsonl"), None, None).await;
    assert_eq!(text.lines().count(), 1);
}

#[tokio::test]
async fn torn_final_line_is_discarded() {
    let dir = tempfile::tempdir().unwrap();
    let sid = {
        let app = router(open(dir.path()));
        let sid = create(&app, 5).await;
        answer_byo(&app, &sid, &[0, 1, 2, 0]).await;
        sid
    };
    let log = dir.path().join(STUDY).join("events.jsonl");
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{\"schemaVersion\":1,\"seq\":3,\"sessionId\":\"");
    std::fs::write(&log, &text).unwrap();

    let app = router(open(dir.path()));
    let (_, view, _) = call(&app, "GET", &format!("/sessions/{sid}/next"), None, None).await;
    assert_eq!(view["progress"]["answered"], 0);
    let (s, _, _) = call(&app, "POST", &format!("/sessions/{sid}/responses"), Some("t1"), Some(choice(1, "left"))).await;
    assert_eq!(s, StatusCode::OK);
    drop(app);
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 3);
    let app = router(open(dir.path()));
    let (_, view, _) = call(&app, "GET", &format!("/sessions/{sid}/next"), None, None).await;
    assert_eq!(view["progress"]["answered"], 1);
}

#[tokio::test]
async fn corrupt_middle_line_fails_startup() {
    let dir = tempfile::tempdir().unwrap();
    {
        let app = router(open(dir.path()));
        let sid = create(&app, 5).await;
        answer_byo(&app, &sid, &[0, 1, 2, 0]).await;
    }
    let log = dir.path().join(STUDY).join("events.jsonl");
    let text = std::fs::read_to_string(&log).unwrap();
    std::fs::write(&log, format!("garbage\n{text}")).unwrap();
    let err = Service::open(dir.path(), vec![(STUDY.to_string(), SurveyDesign::four_by_three())])
        .err()
        .unwrap();
    assert!(err.to_string().contains("line 1"), "{err}");
}

#[tokio::test]
async fn idempotency_rules() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path()));
    let sid = create(&app, 11).await;
    let uri = format!("/sessions/{sid}/responses");
    let byo = json!({"schemaVersion": 1, "kind": "byo", "levels": [0, 0, 1, 2]});

    let (s, _, _) = call(&app, "POST", &uri, None, Some(byo.clone())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s1, first, _) = call(&app, "POST", &uri, Some("k1"), Some(byo.clone())).await;
    let (s2, second, _) = call(&app, "POST", &uri, Some("k1"), Some(byo.clone())).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(first, second);

    let other = json!({"schemaVersion": 1, "kind": "byo", "levels": [1, 0, 1, 2]});
    let (s, err, _) = call(&app, "POST", &uri, Some("k1"), Some(other)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"]["code"], "validation");

    // A new key with a BYO answer after the BYO phase is a conflict.
    let (s, err, _) = call(&app, "POST", &uri, Some("k2"), Some(byo)).await;
    assert_eq!(s, StatusCode::CONFLICT, "{err}");

    let (s, _, _) = call(&app, "POST", &uri, Some("k3"), Some(choice(2, "left"))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _, _) = call(&app, "POST", &uri, Some("k3"), Some(choice(1, "left"))).await;
    assert_eq!(s, StatusCode::OK);
    let (_, view, _) = call(&app, "GET", &format!("/sessions/{sid}/next"), None, None).await;
    assert_eq!(view["progress"]["answered"], 1);

    let lines = std::fs::read_to_string(dir.path().join(STUDY).join("events.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);
}

#[tokio::test]
async fn invalid_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path()));
    let (s, err, _) = call(
        &app,
        "POST",
        "/studies/nope/sessions",
        None,
        Some(json!({"schemaVersion": 1, "populationTag": "FBO"})),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "not_found");
    assert_eq!(err["schemaVersion"], 1);

    let (s, _, _) = call(&app, "GET", "/sessions/missing/next", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, _, _) = call(
        &app,
        "POST",
        &format!("/studies/{STUDY}/sessions"),
        None,
        Some(json!({"schemaVersion": 2, "populationTag": "FBO"})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let sid = create(&app, 1).await;
    let uri = format!("/sessions/{sid}/responses");
    for levels in [json!([0, 0, 0]), json!([0, 0, 0, 3])] {
        let (s, _, _) = call(
            &app,
            "POST",
            &uri,
            Some("k"),
            Some(json!({"schemaVersion": 1, "kind": "byo", "levels": levels})),
        )
        .await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    }
    let (s, _, _) = call(&app, "POST", &uri, Some("k"), Some(choice(1, "left"))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, design, _) = call(&app, "GET", &format!("/studies/{STUDY}"), None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(design["attributes"].as_array().unwrap().len(), 4);

    assert!(Service::open(dir.path(), vec![("../x".into(), SurveyDesign::four_by_three())]).is_err());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_answers_to_one_task() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path()));
    for round in 0..10 {
        let sid = create(&app, round).await;
        answer_byo(&app, &sid, &[0, 0, 0, 0]).await;
        let uri = format!("/sessions/{sid}/responses");
        let (a, b) = tokio::join!(
            tokio::spawn({
                let app = app.clone();
                let uri = uri.clone();
                async move { call(&app, "POST", &uri, Some("a"), Some(choice(1, "left"))).await.0 }
            }),
            tokio::spawn({
                let app = app.clone();
                let uri = uri.clone();
                async move { call(&app, "POST", &uri, Some("b"), Some(choice(1, "right"))).await.0 }
            }),
        );
        let mut got = [a.unwrap(), b.unwrap()];
        got.sort();
        assert_eq!(got, [StatusCode::OK, StatusCode::CONFLICT]);
        let (_, view, _) = call(&app, "GET", &format!("/sessions/{sid}/next"), None, None).await;
        assert_eq!(view["progress"]["answered"], 1);
    }
}
