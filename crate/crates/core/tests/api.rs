use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use nature_disclosure::annotation::{router, AnnotationStore, Task};
use nature_disclosure::guidelines::Guidelines;
use nature_disclosure::prelabel::{BackendError, HttpBackend, HttpBackendConfig, ScorerBackend};

const ANNOTATORS: [&str; 4] = ["ann", "ben", "cat", "dan"];

fn app() -> Router {
    let tasks = (1..=3)
        .map(|i| Task {
            sample_id: format!("s{i}"),
            text: format!("Sentence {i} about wetlands."),
        })
        .collect();
    let store = AnnotationStore::new(tasks, &ANNOTATORS).unwrap();
    router(Arc::new(store), Guidelines::builtin(), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn annotate(app: &Router, sample: &str, who: &str, w: u8, f: u8, b: u8) -> (StatusCode, Value) {
    let body = json!({"sample_id": sample, "annotator_id": who, "water": w, "forest": f, "biodiversity": b});
    call(app, "POST", "/annotations", Some(body)).await
}

#[tokio::test]
async fn split_vote_is_queued_then_resolved() {
    let app = app();
    for (who, w) in ANNOTATORS.iter().zip([1, 1, 0, 0]) {
        let (status, ack) = annotate(&app, "s1", who, w, 0, 0).await;
        assert_eq!(status, StatusCode::OK);
        assert!(ack["timestamp"].as_u64().unwrap() > 0);
    }
    let (_, queue) = call(&app, "GET", "/adjudications", None).await;
    let queue = queue.as_array().unwrap();
    assert_eq!(queue.len(), 1);
    assert_eq!(queue[0]["sample_id"], "s1");
    assert_eq!(queue[0]["dimension"], "water");

    let (status, gold) = call(
        &app,
        "POST",
        "/adjudications/s1",
        Some(json!({"dimension": "water", "value": 1, "resolver_id": "lead"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(gold["water"], 1);
    assert_eq!(gold["nature"], 1);
    let (_, queue) = call(&app, "GET", "/adjudications", None).await;
    assert!(queue.as_array().unwrap().is_empty());
}

#[tokio::test]
async fn resolving_a_clear_majority_conflicts() {
    let app = app();
    for who in ANNOTATORS {
        annotate(&app, "s2", who, 1, 0, 0).await;
    }
    let (status, body) = call(
        &app,
        "POST",
        "/adjudications/s2",
        Some(json!({"dimension": "water", "value": 0, "resolver_id": "lead"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn unknown_ids_and_bad_values_are_rejected() {
    let app = app();
    let (status, _) = annotate(&app, "s1", "eve", 1, 0, 0).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = annotate(&app, "s9", "ann", 1, 0, 0).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = annotate(&app, "s1", "ann", 2, 0, 0).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "GET", "/tasks/next?annotator=eve", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn next_task_skips_done_samples() {
    let app = app();
    let (status, body) = call(&app, "GET", "/tasks/next?annotator=ann", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["task"]["sample_id"], "s1");
    assert!(body["guidelines"]["dimensions"].is_array());
    for s in ["s1", "s2", "s3"] {
        annotate(&app, s, "ann", 0, 0, 0).await;
    }
    let (_, body) = call(&app, "GET", "/tasks/next?annotator=ann", None).await;
    assert!(body["task"].is_null());
}

#[tokio::test]
async fn agreement_needs_two_complete_samples() {
    let app = app();
    let (status, _) = call(&app, "GET", "/agreement", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    for s in ["s1", "s2"] {
        for who in ANNOTATORS {
            annotate(&app, s, who, u8::from(s == "s1"), 0, 0).await;
        }
    }
    let (status, report) = call(&app, "GET", "/agreement", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["samples"], 2);
    assert_eq!(report["dimensions"]["water"]["kappa"], json!({"status": "defined", "value": 1.0}));
    assert_eq!(report["dimensions"]["forest"]["kappa"], json!({"status": "undefined"}));
    assert_eq!(report["dimensions"]["water"]["agree_4of4"], 1.0);
}

#[tokio::test]
async fn progress_and_guidelines() {
    let app = app();
    annotate(&app, "s3", "ben", 0, 1, 0).await;
    let (_, progress) = call(&app, "GET", "/progress", None).await;
    assert_eq!(progress["total_tasks"], 3);
    assert_eq!(progress["per_annotator"]["ben"], 1);
    assert_eq!(progress["per_annotator"]["ann"], 0);
    assert_eq!(progress["complete_samples"], 0);
    let (status, g) = call(&app, "GET", "/guidelines", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(g, serde_json::to_value(Guidelines::builtin()).unwrap());
}

/// Serves one canned HTTP response and hands back the raw request body.
fn one_shot_server(status: &'static str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut request = vec![0; length];
        reader.read_exact(&mut request).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        String::from_utf8(request).unwrap()
    });
    (url, handle)
}

fn backend(endpoint: String) -> HttpBackend {
    HttpBackend::new(HttpBackendConfig {
        endpoint,
        model: "test-model".into(),
        token_env: "NATURE_TEST_TOKEN_UNSET".into(),
        timeout_secs: 5,
    })
}

#[test]
fn http_backend_reads_chat_completion() {
    let (url, server) = one_shot_server(
        "200 OK",
        r#"{"choices":[{"message":{"role":"assistant","content":"Yes, 85"}}]}"#,
    );
    assert_eq!(backend(url).complete("Is it water?").unwrap(), "Yes, 85");
    let sent: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
    assert_eq!(sent["model"], "test-model");
    assert_eq!(sent["messages"][0]["content"], "Is it water?");
}

#[test]
fn http_backend_reports_status_and_bad_bodies() {
    let (url, server) = one_shot_server("503 Service Unavailable", "{}");
    assert!(matches!(
        backend(url).complete("p"),
        Err(BackendError::Status { status: 503 })
    ));
    server.join().unwrap();

    let (url, server) = one_shot_server("200 OK", r#"{"unexpected": true}"#);
    assert!(matches!(backend(url).complete("p"), Err(BackendError::Malformed(_))));
    server.join().unwrap();
}

#[test]
fn http_backend_unreachable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/v1");
    assert!(matches!(backend(url).complete("p"), Err(BackendError::Unreachable(_))));
}
