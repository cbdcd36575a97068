mod common;

use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use common::*;
use odbot::api::{router, AppState, MessageResponse, SessionCreated};
use serde_json::Value;
use tower::ServiceExt;

fn ready_app() -> (Router, AppState) {
    let state = AppState::ready(pipeline(), Duration::from_secs(60));
    (router(state.clone(), &[]).unwrap(), state)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut request = Request::builder().method(method).uri(uri);
    if body.is_some() {
        request = request.header(header::CONTENT_TYPE, "application/json");
    }
    let request = request.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    let json = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, json)
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    serde_json::from_value::<SessionCreated>(body).unwrap().session_id
}

async fn say(app: &Router, id: &str, text: &str) -> (StatusCode, Value) {
    let body = serde_json::json!({ "text": text }).to_string();
    call(app, Method::POST, &format!("/api/sessions/{id}/messages"), Some(&body)).await
}

#[tokio::test]
async fn health_reports_the_model_version() {
    let (app, state) = ready_app();
    let (status, body) = call(&app, Method::GET, "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["model_version"], state.pipeline().unwrap().model_version());
}

#[tokio::test]
async fn everything_but_health_waits_for_the_models() {
    let state = AppState::new(Duration::from_secs(60));
    let app = router(state.clone(), &[]).unwrap();
    let (status, body) = call(&app, Method::GET, "/api/health", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["status"], "loading");
    let (status, _) = call(&app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, _) = say(&app, "x", "hi").await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);

    state.set_pipeline(pipeline());
    let (status, _) = call(&app, Method::GET, "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    new_session(&app).await;
}

#[tokio::test]
async fn greeting_returns_the_mode_buttons() {
    let (app, _) = ready_app();
    let id = new_session(&app).await;
    let (status, body) = say(&app, &id, "hi").await;
    assert_eq!(status, StatusCode::OK);
    let responses = body["responses"].as_array().unwrap();
    assert_eq!(responses.len(), 2);
    let buttons = &responses[1]["buttons"];
    assert_eq!(buttons[0]["title"], "Search");
    assert_eq!(buttons[0]["payload"], "/search");
    assert_eq!(buttons[1]["payload"], "/explore");
    for r in responses {
        assert!(r["text"].is_string() && r["links"].is_array());
    }
}

#[tokio::test]
async fn http_transcripts_match_the_golden_files() {
    let (app, _) = ready_app();
    for (name, messages) in GOLDEN {
        let id = new_session(&app).await;
        let mut transcript = Transcript::new();
        for m in messages {
            let (status, body) = say(&app, &id, m).await;
            assert_eq!(status, StatusCode::OK);
            let parsed: MessageResponse = serde_json::from_value(body).unwrap();
            transcript.push(Exchange {
                user: m.to_string(),
                bot: parsed.responses,
            });
        }
        let golden = std::fs::read_to_string(golden_path(name)).unwrap();
        assert_eq!(to_json(&transcript), golden, "{name}");
    }
}

#[tokio::test]
async fn unknown_session_is_404() {
    let (app, _) = ready_app();
    let (status, body) = say(&app, "no-such-session", "hi").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("no-such-session"));
    let (status, _) = call(&app, Method::GET, "/api/sessions/no-such-session/debug", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let (app, _) = ready_app();
    let id = new_session(&app).await;
    let uri = format!("/api/sessions/{id}/messages");
    for body in ["", "not json", "{}", r#"{"text": 3}"#, r#"["hi"]"#] {
        let (status, reply) = call(&app, Method::POST, &uri, Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body:?}");
        assert!(reply["error"].is_string());
    }
    // The session is untouched by rejected requests.
    let (_, debug) = call(&app, Method::GET, &format!("/api/sessions/{id}/debug"), None).await;
    assert_eq!(debug["events"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn malformed_payload_gets_one_clarification() {
    let (app, _) = ready_app();
    let id = new_session(&app).await;
    for text in [r#"/add_keyword{"topic":"#, "/no_such_intent", r#"/add_keyword{"colour":"red"}"#] {
        let (status, body) = say(&app, &id, text).await;
        assert_eq!(status, StatusCode::OK, "{text}");
        let responses = body["responses"].as_array().unwrap();
        assert_eq!(responses.len(), 1, "{text}");
        assert_eq!(responses[0]["text"], "Sorry, that option is not available.");
    }
}

#[tokio::test]
async fn debug_shows_the_tracker() {
    let (app, _) = ready_app();
    let id = new_session(&app).await;
    say(&app, &id, "find schools in Graz").await;
    let (status, body) = call(&app, Method::GET, &format!("/api/sessions/{id}/debug"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["session_id"], id.as_str());
    assert_eq!(body["slots"]["topic"], "schools");
    assert_eq!(body["slots"]["location"], "Graz");
    assert_eq!(body["slots"]["mode"], "search");
}

#[tokio::test]
async fn expired_sessions_are_404() {
    let state = AppState::ready(pipeline(), Duration::from_millis(50));
    let app = router(state, &[]).unwrap();
    let id = new_session(&app).await;
    let (status, _) = say(&app, &id, "hi").await;
    assert_eq!(status, StatusCode::OK);
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (status, _) = say(&app, &id, "hi").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_allows_only_configured_origins() {
    let state = AppState::ready(pipeline(), Duration::from_secs(60));
    let app = router(state, &["http://localhost:5173".to_string()]).unwrap();
    let preflight = |origin: &str| {
        Request::builder()
            .method(Method::OPTIONS)
            .uri("/api/sessions")
            .header(header::ORIGIN, origin)
            .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
            .body(Body::empty())
            .unwrap()
    };
    let allowed = app.clone().oneshot(preflight("http://localhost:5173")).await.unwrap();
    assert_eq!(
        allowed.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN],
        "http://localhost:5173"
    );
    let denied = app.clone().oneshot(preflight("http://evil.example")).await.unwrap();
    assert!(denied.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());

    assert!(router(AppState::new(Duration::from_secs(1)), &["bad\norigin".to_string()]).is_err());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_posts_to_one_session_are_serialized() {
    let (app, state) = ready_app();
    let id = new_session(&app).await;
    let tasks: Vec<_> = (0..16)
        .map(|i| {
            let app = app.clone();
            let id = id.clone();
            tokio::spawn(async move {
                let text = if i % 2 == 0 { "/search" } else { "/explore" };
                say(&app, &id, text).await.0
            })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    // Each turn ran whole: a user event followed by its bot actions, never
    // two user events back to back.
    let tracker = state.sessions().snapshot(&id).unwrap();
    let kinds: Vec<bool> = tracker
        .events()
        .iter()
        .map(|e| matches!(e, odbot_core::dialogue::Event::User { .. }))
        .collect();
    assert_eq!(kinds.iter().filter(|u| **u).count(), 16);
    assert!(kinds.windows(2).all(|w| !(w[0] && w[1])));
    assert_eq!(kinds.last(), Some(&false));
}
