use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

use reliance_core::fixtures::{generate, SynthOptions};
use reliance_core::pipeline::write_fixture;
use reliance_server::{router, AppState, JOURNAL_FILE};

struct Harness {
    dir: TempDir,
    state: AppState,
    app: Router,
}

impl Harness {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let synth = generate(&SynthOptions { sessions: 4, excluded: 0, ..SynthOptions::default() });
        write_fixture(&synth, &dir.path().join("corpus")).unwrap();
        Self::reopen(dir)
    }

    fn reopen(dir: TempDir) -> Self {
        let state = AppState::open(&dir.path().join("corpus"), &dir.path().join("out"), 2).unwrap();
        let app = router(state.clone(), None);
        Self { dir, state, app }
    }

    async fn call(&self, req: Request<Body>) -> (StatusCode, Vec<u8>) {
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        let (status, body) = self.call(Request::get(uri).body(Body::empty()).unwrap()).await;
        (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
    }

    async fn post(&self, id: &str, annotator: &str, body: Value) -> (StatusCode, Value) {
        let req = Request::post(format!("/api/segments/{id}/labels"))
            .header("content-type", "application/json")
            .header("x-annotator", annotator)
            .body(Body::from(body.to_string()))
            .unwrap();
        let (status, body) = self.call(req).await;
        (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
    }

    async fn label(&self, id: &str, annotator: &str, round: u32, hs: &str, ru: &str) {
        let (status, body) =
            self.post(id, annotator, json!({"round": round, "help_seeking": hs, "response_use": ru})).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
    }

    fn ten_ids(&self) -> Vec<String> {
        let ids = self.state.segment_ids();
        assert!(ids.len() >= 10, "fixture has {} segments", ids.len());
        ids.into_iter().take(10).collect()
    }
}

#[tokio::test]
async fn posted_label_is_exported_verbatim() {
    let h = Harness::new();
    let id = h.ten_ids()[0].clone();
    let (status, stored) = h
        .post(&id, "ann1", json!({"round": 1, "help_seeking": "Active", "response_use": "passive", "timestamp": 42}))
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(stored["response_use"], "Passive");
    assert_eq!(stored["annotator_id"], "ann1");
    assert_eq!(stored["source"], "human");

    let (status, body) = h.call(Request::get("/api/export").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let lines: Vec<Value> =
        String::from_utf8(body).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines, vec![stored.clone()]);

    // the journal on disk holds the same line and survives a restart
    let journal = std::fs::read_to_string(h.dir.path().join("out").join(JOURNAL_FILE)).unwrap();
    assert_eq!(serde_json::from_str::<Value>(journal.trim()).unwrap(), stored);
    let h = Harness::reopen(h.dir);
    assert_eq!(h.state.records().len(), 1);
    let (status, _) = h.post(&id, "ann1", json!({"round": 1, "help_seeking": "A", "response_use": "A"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn identical_labels_agree_fully() {
    let h = Harness::new();
    for id in h.ten_ids() {
        for ann in ["ann1", "ann2"] {
            h.label(&id, ann, 1, "Active", "Constructive").await;
        }
    }
    let (status, body) = h.get("/api/agreement?round=1").await;
    assert_eq!(status, StatusCode::OK);
    let pairs = body["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 1);
    for t in pairs[0]["report"]["result"]["targets"].as_array().unwrap() {
        assert_eq!(t["percent_agreement"], 1.0, "{t}");
        assert_eq!(t["n"], 10);
    }
    assert_eq!(body["disagreements"], json!([]));
}

#[tokio::test]
async fn three_disagreements_in_ten() {
    let h = Harness::new();
    let ids = h.ten_ids();
    for (i, id) in ids.iter().enumerate() {
        h.label(id, "ann1", 1, "Passive", "Active").await;
        let hs = if i % 3 == 0 && i > 0 { "Constructive" } else { "Passive" };
        h.label(id, "ann2", 1, hs, "Active").await;
    }
    let mut expected: Vec<String> = vec![ids[3].clone(), ids[6].clone(), ids[9].clone()];
    expected.sort();

    let (_, body) = h.get("/api/agreement?round=1").await;
    let report = &body["pairs"][0]["report"]["result"];
    let target = |name: &str| {
        report["targets"].as_array().unwrap().iter().find(|t| t["name"] == name).unwrap().clone()
    };
    let hs = target("help_seeking");
    assert!((hs["percent_agreement"].as_f64().unwrap() - 0.7).abs() < 1e-12);
    let mut got: Vec<String> = serde_json::from_value(hs["disagreements"].clone()).unwrap();
    got.sort();
    assert_eq!(got, expected);
    assert_eq!(target("response_use")["percent_agreement"], 1.0);
    assert_eq!(serde_json::from_value::<Vec<String>>(body["disagreements"].clone()).unwrap(), expected);

    // round 2 queue puts the three disputed segments first
    let (status, queue) = h.get("/api/segments?round=2&annotator=ann1").await;
    assert_eq!(status, StatusCode::OK);
    let items = queue["segments"].as_array().unwrap();
    assert_eq!(items.len(), h.state.segment_ids().len());
    let mut head: Vec<String> = items[..3].iter().map(|i| i["segment_id"].as_str().unwrap().to_string()).collect();
    head.sort();
    assert_eq!(head, expected);
    assert!(items[..3].iter().all(|i| i["disagreement"] == true));
    assert!(items[3..].iter().all(|i| i["disagreement"] == false));
}

#[tokio::test]
async fn queue_skips_own_labels_in_round() {
    let h = Harness::new();
    let ids = h.ten_ids();
    h.label(&ids[0], "ann1", 1, "Passive", "Passive").await;
    let (_, q1) = h.get("/api/segments?round=1&annotator=ann1").await;
    let (_, q2) = h.get("/api/segments?round=1&annotator=ann2").await;
    let (_, q3) = h.get("/api/segments?round=2&annotator=ann1").await;
    let total = h.state.segment_ids().len();
    assert_eq!(q1["remaining"], total - 1);
    assert_eq!(q2["remaining"], total);
    assert_eq!(q3["remaining"], total);
    assert!(q1["segments"].as_array().unwrap().iter().all(|s| s["segment_id"] != ids[0].as_str()));
}

#[tokio::test]
async fn labels_are_blind_outside_adjudication() {
    let h = Harness::new();
    let id = h.ten_ids()[1].clone();
    h.label(&id, "ann1", 1, "Passive", "Passive").await;
    h.label(&id, "ann2", 1, "Active", "Active").await;
    h.label(&id, "ann2", 2, "Active", "Passive").await;

    for round in [1, 2] {
        let (status, view) = h.get(&format!("/api/segments/{id}?round={round}&annotator=ann1")).await;
        assert_eq!(status, StatusCode::OK);
        let labels = view["labels"].as_array().unwrap();
        assert!(labels.iter().all(|l| l["annotator_id"] == "ann1"), "{labels:?}");
        assert_eq!(labels.len(), 1);
    }
    let (_, anon) = h.get(&format!("/api/segments/{id}")).await;
    assert_eq!(anon["labels"], json!([]));
    let (_, adj) = h.get(&format!("/api/segments/{id}?annotator=ann1&adjudication=true")).await;
    assert_eq!(adj["labels"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn segment_view_carries_transcript_edits_and_copies() {
    let h = Harness::new();
    let views: Vec<Value> = {
        let mut v = Vec::new();
        for id in h.state.segment_ids() {
            v.push(h.get(&format!("/api/segments/{id}")).await.1);
        }
        v
    };
    assert!(views.iter().all(|v| !v["messages"].as_array().unwrap().is_empty()));
    let edits: Vec<&Value> = views.iter().flat_map(|v| v["edits"].as_array().unwrap()).collect();
    assert!(!edits.is_empty());
    assert!(edits.iter().all(|e| e["offset"].is_u64() && e["inserted"].is_string() && e["bulk_insert"].is_boolean()));
    let copies: Vec<&Value> = views.iter().flat_map(|v| v["copies"].as_array().unwrap()).collect();
    assert!(copies.iter().any(|c| c["matches_response"] == true));
}

#[tokio::test]
async fn error_statuses() {
    let h = Harness::new();
    let id = h.ten_ids()[0].clone();
    let ok = json!({"round": 1, "help_seeking": "Passive", "response_use": "Active"});

    assert_eq!(h.get("/api/segments/nope").await.0, StatusCode::NOT_FOUND);
    assert_eq!(h.post("nope", "ann1", ok.clone()).await.0, StatusCode::NOT_FOUND);

    let bad_mode = json!({"round": 1, "help_seeking": "Reflective", "response_use": "Active"});
    let (status, body) = h.post(&id, "ann1", bad_mode).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("Reflective"));
    let round0 = json!({"round": 0, "help_seeking": "Passive", "response_use": "Active"});
    assert_eq!(h.post(&id, "ann1", round0).await.0, StatusCode::BAD_REQUEST);
    let bad_kc = json!({"round": 1, "help_seeking": "Passive", "response_use": "Active", "kc_id": "nope"});
    assert_eq!(h.post(&id, "ann1", bad_kc).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(h.post(&id, "", ok.clone()).await.0, StatusCode::BAD_REQUEST);
    let (status, _) = h
        .call(
            Request::post(format!("/api/segments/{id}/labels"))
                .header("x-annotator", "ann1")
                .body(Body::from("{not json"))
                .unwrap(),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    assert_eq!(h.post(&id, "ann1", ok.clone()).await.0, StatusCode::CREATED);
    assert_eq!(h.post(&id, "ann1", ok.clone()).await.0, StatusCode::CONFLICT);
    // rejected posts never touch the store
    assert_eq!(h.state.records().len(), 1);
    assert_eq!(h.post(&id, "ann1", json!({"round": 2, "help_seeking": "P", "response_use": "C"})).await.0, StatusCode::CREATED);
    assert_eq!(h.state.records().len(), 2);
}

#[tokio::test]
async fn concurrent_posts_serialize() {
    let h = Harness::new();
    let ids = h.ten_ids();
    let mut tasks = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        for ann in ["a", "b", "c"] {
            let app = h.app.clone();
            let uri = format!("/api/segments/{id}/labels");
            let body = json!({"round": 1 + (i % 2) as u32, "help_seeking": "Active", "response_use": "Active"});
            tasks.push(tokio::spawn(async move {
                let req = Request::post(uri).header("x-annotator", ann).body(Body::from(body.to_string())).unwrap();
                app.oneshot(req).await.unwrap().status()
            }));
        }
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::CREATED);
    }
    let journal = std::fs::read_to_string(h.dir.path().join("out").join(JOURNAL_FILE)).unwrap();
    assert_eq!(journal.lines().count(), 30);
    assert_eq!(h.state.records().len(), 30);
}

#[tokio::test]
async fn root_serves_placeholder_or_static_dir() {
    let h = Harness::new();
    let (status, body) = h.call(Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("/api"));

    let assets = TempDir::new().unwrap();
    std::fs::write(assets.path().join("index.html"), "<p>ui</p>").unwrap();
    let app = router(h.state.clone(), Some(assets.path()));
    let res = app.oneshot(Request::get("/").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.into_body().collect().await.unwrap().to_bytes().as_ref(), b"<p>ui</p>");
}
