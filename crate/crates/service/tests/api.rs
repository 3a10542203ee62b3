use std::sync::Arc;

use ambihedge::domain::{Event, EventPartition, WaveId};
use ambihedge::elicitation::{run_session, start_session};
use ambihedge_service::{
    router, ChoiceRequest, CreateRequest, ErrorBody, NextResponse, ResultResponse, SeedSource, ServiceError,
    SessionStore,
};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(seed: u64) -> Router {
    router(Arc::new(SessionStore::in_memory(SeedSource::deterministic(seed))))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session"].as_str().unwrap().to_string()
}

async fn next(app: &Router, id: &str) -> NextResponse {
    let (status, v) = call(app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_value(v).unwrap()
}

async fn post_choice(app: &Router, id: &str, ordinal: u32, chose_bet: bool) -> (StatusCode, Value) {
    let body = serde_json::to_value(ChoiceRequest { ordinal, chose_bet }).unwrap();
    call(app, Method::POST, &format!("/sessions/{id}/choices"), Some(body)).await
}

/// Answers every question with `rule(event, offered)` and returns the result payload.
async fn complete(app: &Router, id: &str, rule: impl Fn(Event, f64) -> bool) -> ResultResponse {
    while let NextResponse::Ask { ordinal, event, offered, .. } = next(app, id).await {
        let (status, _) = post_choice(app, id, ordinal, rule(event, offered)).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, v) = call(app, Method::GET, &format!("/sessions/{id}/result"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    serde_json::from_value(v).unwrap()
}

fn error_code(v: &Value) -> String {
    let body: ErrorBody = serde_json::from_value(v.clone()).expect("error body");
    body.error.code
}

#[tokio::test]
async fn default_session_has_thirty_questions_and_ids_are_distinct() {
    let app = app(1);
    let (status, a) = call(&app, Method::POST, "/sessions", Some(json!({"respondent": "r1"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(a["total_questions"], 30);
    assert_eq!(a["remaining"], 30);
    assert_eq!(a["digest"].as_str().unwrap().len(), 64);
    let (_, b) = call(&app, Method::POST, "/sessions", Some(json!({"respondent": "r1"}))).await;
    assert_ne!(a["session"], b["session"]);
    let (status, h) = call(&app, Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(h, json!({"status": "ok", "sessions": 2}));
}

#[tokio::test]
async fn fresh_session_offers_fifty_percent_until_answered() {
    let app = app(2);
    let id = create(&app, json!({"respondent": "r"})).await;
    let first = next(&app, &id).await;
    let NextResponse::Ask { offered_percent, ordinal, ref description, progress, .. } = first else {
        panic!("expected a question");
    };
    assert_eq!(offered_percent, 50.0);
    assert_eq!(ordinal, 0);
    assert!(description.contains("after six months"));
    assert_eq!((progress.answered, progress.total), (0, 30));
    assert_eq!(next(&app, &id).await, first);
    assert_eq!(next(&app, &id).await, first);

    let (status, v) = post_choice(&app, &id, 0, true).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["remaining"], 29);
    assert_eq!(v["complete"], false);
    assert_ne!(next(&app, &id).await, first);
}

#[tokio::test]
async fn conflicts_and_missing_sessions() {
    let app = app(3);
    let id = create(&app, json!({"respondent": "r", "depth": 1})).await;

    let (status, v) = call(&app, Method::GET, &format!("/sessions/{id}/result"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "session_incomplete");

    assert_eq!(post_choice(&app, &id, 0, false).await.0, StatusCode::OK);
    // The same question posted twice.
    let (status, v) = post_choice(&app, &id, 0, false).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "stale_question");

    for k in 1..6 {
        assert_eq!(post_choice(&app, &id, k, true).await.0, StatusCode::OK);
    }
    assert!(matches!(next(&app, &id).await, NextResponse::Done { .. }));
    let (status, v) = post_choice(&app, &id, 6, true).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "session_complete");

    for uri in ["/sessions/nope/next", "/sessions/nope/result"] {
        let (status, v) = call(&app, Method::GET, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(error_code(&v), "not_found");
    }
    let (status, _) = post_choice(&app, "nope", 0, true).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_requests_are_rejected_with_a_message() {
    let app = app(4);
    for body in [
        json!({"respondent": "r", "depth": 0}),
        json!({"respondent": "r", "depth": 31}),
        json!({"respondent": "r", "partition": {"lower": 1100.0, "upper": 950.0}}),
        json!({"respondent": ""}),
        json!({"respondent": "has space"}),
        json!({"respondent": "r", "seed": 7}),
        json!({"depth": 3}),
    ] {
        let (status, v) = call(&app, Method::POST, "/sessions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(error_code(&v), "invalid_request");
        assert!(!v["error"]["message"].as_str().unwrap().is_empty());
    }
    let id = create(&app, json!({"respondent": "r"})).await;
    let (status, v) = call(&app, Method::POST, &format!("/sessions/{id}/choices"), Some(json!({"chose_bet": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&v), "invalid_request");
}

#[tokio::test]
async fn scripted_session_matches_a_direct_engine_run() {
    let app = app(5);
    let id = create(&app, json!({"respondent": "eq", "wave": 2, "depth": 6, "partition": {"lower": 900, "upper": 1200}}))
        .await;
    let latent = |e: Event| [0.21, 0.37, 0.33, 0.62, 0.48, 0.71][e.index()];
    let result = complete(&app, &id, |e, q| latent(e) > q).await;

    let partition = EventPartition::new(900.0, 1200.0).unwrap();
    let engine = start_session(partition, 6, Some(result.seed), "eq".into(), WaveId(2)).unwrap();
    assert_eq!(engine.id(), id);
    assert_eq!(engine.commitment_digest(), result.digest);
    let done = run_session(engine, |e, q| latent(e) > q).finalize().unwrap();
    assert_eq!(done.intervals, result.intervals);
    assert_eq!(done.payout, result.payout);
    assert_eq!(done.payout_question, result.payout_question);
}

#[tokio::test]
async fn neutral_respondent_has_no_aversion_and_unit_sensitivity() {
    let p = [0.3, 0.45, 0.25];
    let prob = |e: Event| e.members().iter().map(|&i| p[i]).sum::<f64>();
    let app = app(6);
    for depth in [3u32, 5, 8] {
        let id = create(&app, json!({"respondent": "neutral", "depth": depth})).await;
        let r = complete(&app, &id, |e, q| prob(e) > q).await;
        let tol = 6.0 * 2f64.powi(-(depth as i32));
        assert!(r.indices.aversion.abs() <= tol, "{:?}", r.indices);
        assert!((r.indices.sensitivity - 1.0).abs() <= tol, "{:?}", r.indices);
    }
}

#[tokio::test]
async fn revealed_seed_verifies_only_untampered() {
    let app = app(7);
    let id = create(&app, json!({"respondent": "v", "depth": 2})).await;
    let (_, created) = call(&app, Method::GET, "/healthz", None).await;
    assert_eq!(created["sessions"], 1);
    let r = complete(&app, &id, |_, q| q < 0.4).await;
    assert_eq!(r.verify(), Ok(()));
    let tampered = ResultResponse { seed: r.seed ^ 1, ..r.clone() };
    assert_eq!(tampered.verify(), Err(ServiceError::Integrity));
    let moved = ResultResponse { payout_question: (r.payout_question + 1) % 12, ..r };
    assert_eq!(moved.verify(), Err(ServiceError::Integrity));
}

#[tokio::test]
async fn result_is_stable_once_complete() {
    let app = app(8);
    let id = create(&app, json!({"respondent": "s", "depth": 2})).await;
    let a = complete(&app, &id, |_, q| q > 0.5).await;
    let b = complete(&app, &id, |_, _| true).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn create_request_round_trips() {
    let req = CreateRequest { depth: Some(4), ..CreateRequest::new("x") };
    let v = serde_json::to_value(&req).unwrap();
    assert_eq!(serde_json::from_value::<CreateRequest>(v).unwrap(), req);
}
