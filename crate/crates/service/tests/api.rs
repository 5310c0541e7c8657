use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use cgm_core::fixture::MEETING_SCHEDULER;
use cgm_service::{router, AppState, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(AppState::new(Store::default(), Duration::from_secs(60)))
}

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<String>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body.into())).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

async fn model(app: &Router, text: &str) -> String {
    let (s, v) = call(app, Method::POST, "/models", text).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["modelId"].as_str().unwrap().to_string()
}

async fn scenario(app: &Router, model_id: &str, body: &str) -> String {
    let (s, v) = call(app, Method::POST, &format!("/models/{model_id}/scenarios"), body).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn patch(app: &Router, sid: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::PATCH, &format!("/scenarios/{sid}/assertions"), body.to_string()).await
}

async fn solve(app: &Router, sid: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, &format!("/scenarios/{sid}/solve"), body.to_string()).await
}

fn satisfied(v: &Value) -> Vec<&str> {
    v["realization"]["satisfied"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect()
}

#[tokio::test]
async fn health_and_listing() {
    let app = app();
    let (s, v) = call(&app, Method::GET, "/healthz", "").await;
    assert_eq!((s, v), (StatusCode::OK, Value::String("ok".into())));
    let (s, v) = call(&app, Method::GET, "/api", "").await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["routes"].as_array().unwrap().iter().any(|r| r["path"] == "/scenarios/{id}/solve"));
}

#[tokio::test]
async fn fixture_weight_loop() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, "{\"assertions\": {}}").await;
    let (s, v) = patch(&app, &sid, json!({ "ScheduleMeeting": true })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["assertions"], json!({ "ScheduleMeeting": true }));
    let (s, v) = solve(&app, &sid, json!({ "lex": ["Weight"] })).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "realizable");
    assert_eq!(v["realization"]["objectiveValues"], json!(["-65/1"]));
    assert!(!satisfied(&v).contains(&"MinimalEffort"));
}

#[tokio::test]
async fn conflicting_assertions_yield_core_with_conflict_edge() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, "").await;
    patch(&app, &sid, json!({ "ConfirmOccurrence": true, "CancelMeeting": true })).await;
    let (s, v) = solve(&app, &sid, json!({ "lex": ["Weight"] })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "unrealizable");
    let (_, graph) = call(&app, Method::GET, &format!("/models/{mid}/graph"), "").await;
    let conflict = graph["edges"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| {
            e["type"] == "conflict"
                && [&e["from"], &e["to"]].iter().all(|x| *x == "ConfirmOccurrence" || *x == "CancelMeeting")
        })
        .expect("conflict edge in graph");
    let core_edges: Vec<&Value> =
        v["coreGroups"].as_array().unwrap().iter().flat_map(|g| g["edges"].as_array().unwrap()).collect();
    assert!(core_edges.contains(&&conflict["id"]), "{v}");

    let (s, c) = call(&app, Method::POST, &format!("/scenarios/{sid}/core"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(c["status"], "core");
    assert_eq!(c["groups"], v["core"]);
}

#[tokio::test]
async fn empty_model_fresh_scenario() {
    let app = app();
    let mid = model(&app, "").await;
    let sid = scenario(&app, &mid, "").await;
    let (s, v) = solve(&app, &sid, json!({})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "realizable");
    assert_eq!(v["realization"]["satisfied"], json!([]));
}

#[tokio::test]
async fn assertion_errors() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, "").await;
    let (s, v) = patch(&app, &sid, json!({ "NoSuchGoal": true })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "UnknownReference");
    let (s, v) = patch(&app, &sid, json!({ "R1": false })).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "KindMismatch");
    let (s, v) = patch(&app, &sid, json!({ "ScheduleMeeting": "yes" })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "BadRequest");
}

#[tokio::test]
async fn patches_are_idempotent_and_null_clears() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, "").await;
    let (_, initial) = call(&app, Method::GET, &format!("/scenarios/{sid}"), "").await;
    assert_eq!(initial["assertions"], json!({ "ScheduleMeeting": true }));
    let (_, a) = patch(&app, &sid, json!({ "LowCost": false })).await;
    let (_, b) = patch(&app, &sid, json!({ "LowCost": false })).await;
    assert_eq!(a, b);
    let (_, c) = patch(&app, &sid, json!({ "LowCost": null, "ScheduleMeeting": null })).await;
    assert_eq!(c["assertions"], json!({}));
    let (_, r) = solve(&app, &sid, json!({})).await;
    assert_eq!(r["status"], "realizable");
    assert_eq!(r["realization"]["satisfied"], json!([]));
}

#[tokio::test]
async fn base_model_is_unchanged_by_scenarios() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let (_, before) = call(&app, Method::GET, &format!("/models/{mid}"), "").await;
    let sid = scenario(&app, &mid, "").await;
    patch(&app, &sid, json!({ "ScheduleMeeting": false, "LowCost": true })).await;
    let (_, after) = call(&app, Method::GET, &format!("/models/{mid}"), "").await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn invalid_models_are_reported() {
    let app = app();
    let (s, v) = call(&app, Method::POST, "/models", "goal ;").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "ParseError");
    assert_eq!(v["errors"][0]["line"], 1);
    let (s, v) = call(&app, Method::POST, "/models", "goal A; refine A <- B;").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "ValidationError");
    assert_eq!(v["report"]["issues"][0]["code"], "UnknownReference");
    let (s, v) = call(&app, Method::POST, "/models", "{\"format\": \"cgm/1\", \"elements\": 3}").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "SchemaError");
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let app = app();
    for (m, uri) in [
        (Method::GET, "/models/nope"),
        (Method::GET, "/models/nope/graph"),
        (Method::POST, "/models/nope/scenarios"),
        (Method::GET, "/scenarios/nope"),
        (Method::POST, "/scenarios/nope/solve"),
        (Method::POST, "/scenarios/nope/core"),
        (Method::GET, "/scenarios/nope/realizations"),
    ] {
        let (s, v) = call(&app, m, uri, "").await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["code"], "NotFound");
    }
}

#[tokio::test]
async fn json_models_round_trip() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let (_, doc) = call(&app, Method::GET, &format!("/models/{mid}"), "").await;
    let mid2 = model(&app, &doc.to_string()).await;
    let (_, doc2) = call(&app, Method::GET, &format!("/models/{mid2}"), "").await;
    assert_eq!(doc, doc2);
    let (_, g) = call(&app, Method::GET, &format!("/models/{mid2}/graph"), "").await;
    assert_eq!(g["nodes"].as_array().unwrap().len(), 54);
    assert_eq!(g["classification"]["mandatory"], json!(["ScheduleMeeting"]));
}

#[tokio::test]
async fn realization_pages() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, "").await;
    let (s, v) = call(&app, Method::GET, &format!("/scenarios/{sid}/realizations?limit=3"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["realizations"].as_array().unwrap().len(), 3);
    assert_eq!(v["exhausted"], false);

    let small = model(&app, "goal g; goal a; goal b; refine g <- a; refine g <- b; assert g true;").await;
    let sid = scenario(&app, &small, "").await;
    let (_, v) = call(&app, Method::GET, &format!("/scenarios/{sid}/realizations?limit=3"), "").await;
    assert_eq!(v["realizations"].as_array().unwrap().len(), 3);
    assert_eq!(v["exhausted"], true);
    let (_, v) = solve(&app, &sid, json!({ "mode": "enumerate", "limit": 10 })).await;
    assert_eq!(v["realizations"].as_array().unwrap().len(), 3);
    let (s, _) = call(&app, Method::GET, &format!("/scenarios/{sid}/realizations?limit=0"), "").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn solve_request_validation() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, "").await;
    let (s, v) = solve(&app, &sid, json!({ "timeout": -1 })).await;
    assert_eq!((s, &v["code"]), (StatusCode::BAD_REQUEST, &json!("BadRequest")));
    let (s, v) = solve(&app, &sid, json!({ "lex": ["noSuchObjective"] })).await;
    assert_eq!((s, &v["code"]), (StatusCode::BAD_REQUEST, &json!("EncodeError")));
    let (s, _) = solve(&app, &sid, json!({ "bogus": 1 })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = solve(&app, &sid, json!({ "lex": [{ "id": "Weight", "direction": "max" }], "timeout": 1e9 })).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["realization"]["objectiveValues"], json!(["150/1"]));
}

#[tokio::test]
async fn tight_timeout_returns_budget() {
    let app = router(AppState::new(Store::default(), Duration::from_micros(1)));
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, "").await;
    let (s, v) = solve(&app, &sid, json!({ "lex": ["Weight"] })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "budget");
}

#[tokio::test]
async fn scenario_objectives_are_used_by_default() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, r#"{"objectives": ["Weight", "workTime", "cost"]}"#).await;
    let (_, v) = solve(&app, &sid, json!({})).await;
    assert_eq!(v["realization"]["objectiveValues"], json!(["-65/1", "2/1", "0/1"]));
    let (s, v) = call(&app, Method::POST, &format!("/models/{mid}/scenarios"), r#"{"objectives": ["nope"]}"#).await;
    assert_eq!((s, &v["code"]), (StatusCode::BAD_REQUEST, &json!("EncodeError")));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_scenarios_do_not_interfere() {
    let app = app();
    let mid = model(&app, MEETING_SCHEDULER).await;
    let a = scenario(&app, &mid, "").await;
    let b = scenario(&app, &mid, "").await;
    patch(&app, &b, json!({ "ConfirmOccurrence": true, "CancelMeeting": true })).await;
    let (ra, rb) = tokio::join!(
        solve(&app, &a, json!({ "lex": ["Weight"] })),
        solve(&app, &b, json!({ "lex": ["Weight"] })),
    );
    assert_eq!(ra.1["realization"]["objectiveValues"], json!(["-65/1"]));
    assert_eq!(rb.1["status"], "unrealizable");
    let again = solve(&app, &a, json!({ "lex": ["Weight"] })).await;
    assert_eq!(again.1, ra.1);
}

#[tokio::test]
async fn state_file_restores_models_and_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.jsonl");
    let app = router(AppState::new(Store::open(&path).unwrap(), Duration::from_secs(60)));
    let mid = model(&app, MEETING_SCHEDULER).await;
    let sid = scenario(&app, &mid, "").await;
    patch(&app, &sid, json!({ "LowCost": true })).await;
    let (_, before) = call(&app, Method::GET, &format!("/scenarios/{sid}"), "").await;
    drop(app);

    let app = router(AppState::new(Store::open(&path).unwrap(), Duration::from_secs(60)));
    let (s, after) = call(&app, Method::GET, &format!("/scenarios/{sid}"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(before, after);
    let (_, v) = solve(&app, &sid, json!({ "lex": ["Weight"] })).await;
    assert_eq!(v["status"], "realizable");
    assert!(satisfied(&v).contains(&"LowCost"));
}

#[tokio::test]
async fn cors_headers_present() {
    let app = app();
    let req = Request::builder()
        .method(Method::GET)
        .uri("/healthz")
        .header("Origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert!(res.headers().contains_key("access-control-allow-origin"));
}
