mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use anchorlink_service::router;
use common::Fixture;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn event(decision: &str) -> Value {
    json!({
        "article": "Trip",
        "span": {"start": 10, "end": 17},
        "surface": "Chicago",
        "target": "Chicago",
        "probability": 0.88,
        "decision": decision,
        "client_id": "ui-1"
    })
}

#[tokio::test]
async fn recommendations_endpoint() {
    let fx = Fixture::new();
    let app = router(fx.serving());
    let (status, body) = call(&app, "GET", "/v1/recommendations/Trip", None).await;
    assert_eq!(status, StatusCode::OK);
    let recs = body["recommendations"].as_array().unwrap();
    assert_eq!(recs.len(), 3);
    assert_eq!(recs[0]["id"], "10-17");
    assert_eq!(recs[0]["target"], "Chicago");
    assert_eq!(recs[0]["span"], json!({"start": 10, "end": 17}));
    assert_eq!(
        recs[1]["alternates"],
        json!([{"target": "Paris (Texas)", "probability": recs[1]["probability"]}])
    );
    assert_eq!(body["stale"], false);

    let (status, _) = call(&app, "GET", "/v1/recommendations/Nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, body) = call(&app, "GET", "/v1/recommendations/Empty", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["recommendations"], json!([]));

    let (status, body) = call(&app, "GET", "/v1/recommendations/Paris%20(Texas)", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["article"], "Paris (Texas)");
}

#[tokio::test]
async fn tasks_endpoint() {
    let fx = Fixture::new();
    let app = router(fx.serving());
    let (_, body) = call(&app, "GET", "/v1/tasks?min_links=0", None).await;
    let titles: Vec<&str> = body
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["article"].as_str().unwrap())
        .collect();
    assert_eq!(titles, ["Trip", "Notes", "Story"]);
    assert_eq!(body[0]["recommendations"], 3);
    let (_, body) = call(&app, "GET", "/v1/tasks?min_links=2", None).await;
    assert_eq!(body.as_array().unwrap().len(), 1);
    let (_, body) = call(&app, "GET", "/v1/tasks?min_links=99", None).await;
    assert_eq!(body, json!([]));
    let (_, body) = call(&app, "GET", "/v1/tasks", None).await;
    assert_eq!(body, json!([]));
}

#[tokio::test]
async fn feedback_endpoint() {
    let fx = Fixture::new();
    let state = fx.serving();
    let app = router(state.clone());

    let (status, body) = call(&app, "POST", "/v1/feedback", Some(event("accepted"))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["id"], 1);

    let (status, body) = call(&app, "POST", "/v1/feedback", Some(event("maybe"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "decision");

    let mut rejected = event("rejected");
    rejected["rejection_reason"] = json!("incorrect link destination");
    let (status, body) = call(&app, "POST", "/v1/feedback", Some(rejected)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["id"], 2);

    let mut skipped = event("skipped");
    skipped["rejection_reason"] = json!("incorrect link destination");
    let (status, body) = call(&app, "POST", "/v1/feedback", Some(skipped)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "rejection_reason");

    let mut odd = event("rejected");
    odd["rejection_reason"] = json!("too long");
    let (_, body) = call(&app, "POST", "/v1/feedback", Some(odd)).await;
    assert_eq!(body["field"], "rejection_reason");

    let mut missing = event("accepted");
    missing.as_object_mut().unwrap().remove("target");
    let (status, body) = call(&app, "POST", "/v1/feedback", Some(missing)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "target");

    assert_eq!(state.feedback_state().events.len(), 2);
    let (_, reasons) = call(&app, "GET", "/v1/reasons", None).await;
    assert_eq!(reasons, json!(["incorrect link destination"]));
}

#[tokio::test]
async fn edits_endpoint() {
    let fx = Fixture::new();
    let app = router(fx.serving());
    let (status, body) = call(
        &app,
        "POST",
        "/v1/edits",
        Some(json!({"article": "Trip", "accepted": ["24-29"], "client_id": "ui-1"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["text"], "We met in Chicago, then [[Paris]] and Lyon.");
    assert_eq!(body["events"], json!([1]));

    let (status, _) = call(
        &app,
        "POST",
        "/v1/edits",
        Some(json!({"article": "Trip", "accepted": ["10-17"]})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(
        &app,
        "POST",
        "/v1/edits",
        Some(json!({"article": "Nope", "accepted": []})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = call(&app, "POST", "/v1/edits", Some(json!({"accepted": []}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "article");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_edits_on_one_article() {
    for round in 0..20 {
        let fx = Fixture::new();
        let state = fx.serving();
        let app = router(state.clone());
        let barrier = std::sync::Arc::new(tokio::sync::Barrier::new(2));
        let submit = |ids: Value| {
            let app = app.clone();
            let barrier = barrier.clone();
            tokio::spawn(async move {
                barrier.wait().await;
                call(
                    &app,
                    "POST",
                    "/v1/edits",
                    Some(json!({"article": "Trip", "accepted": ids})),
                )
                .await
                .0
            })
        };
        let a = submit(json!(["10-17"]));
        let b = submit(json!(["24-29", "34-38"]));
        let mut statuses = vec![a.await.unwrap(), b.await.unwrap()];
        statuses.sort();
        assert_eq!(
            statuses,
            [StatusCode::OK, StatusCode::CONFLICT],
            "round {round}"
        );
        let links = anchorlink::corpus::parse_markup(&state.article_text("Trip").unwrap())
            .unwrap()
            .links
            .len();
        assert_eq!(state.feedback_state().events.len(), links);
    }
}
