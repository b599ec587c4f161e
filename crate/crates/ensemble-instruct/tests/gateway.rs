mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use ensemble_instruct::gateway::{Backend, BackendDescriptor, FinishReason, GatewayError, MockEntry};
use serde_json::Value;

struct Captured {
    auth: Option<String>,
    body: Value,
}

const ECHO: &str = "<echo the prompt>";

/// Serves one canned `(status, body)` per connection, in order. A body of
/// [`ECHO`] answers with the request's prompt as the completion.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    std::thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut auth) = (0, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => len = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let request: Value = serde_json::from_slice(&buf).unwrap();
            let body = if body == ECHO {
                ok_body(request["prompt"].as_str().unwrap(), "stop")
            } else {
                body
            };
            log.lock().unwrap().push(Captured { auth, body: request });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn ok_body(text: &str, finish: &str) -> String {
    serde_json::json!({"choices": [{"text": text, "finish_reason": finish}]}).to_string()
}

fn http_backend(url: &str, retries: u32) -> Backend {
    let mut d = BackendDescriptor::http("remote", url, "tiiuae/falcon-40b");
    d.retries = retries;
    Backend::http_with_backoff(d, Duration::from_millis(1)).unwrap()
}

#[test]
fn rate_limits_are_retried() {
    let (url, seen) = serve(vec![
        (429, "{}".into()),
        (429, "{}".into()),
        (200, ok_body(" yes\n|EoS|\nmore", "stop")),
    ]);
    let backend = http_backend(&url, 3);
    let req = backend.request("instruction: Is it?\noutput:").with_stop("|EoS|").with_max_tokens(16);
    let c = backend.complete(&req).unwrap();
    assert_eq!(c.text, " yes\n");
    assert_eq!(backend.attempts(), 3);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert_eq!(seen[2].body["model"], "tiiuae/falcon-40b");
    assert_eq!(seen[2].body["max_tokens"], 16);
    assert_eq!(seen[2].body["stop"], "|EoS|");
    assert!(seen[2].auth.is_none());
}

#[test]
fn unauthorized_fails_without_retry() {
    let (url, seen) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let backend = http_backend(&url, 3);
    match backend.complete(&backend.request("p")) {
        Err(GatewayError::Protocol { status, body, .. }) => {
            assert_eq!(status, 401);
            assert!(body.contains("bad key"));
        }
        other => panic!("expected protocol error, got {other:?}"),
    }
    assert_eq!(backend.attempts(), 1);
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn retries_run_out_as_transport_error() {
    let (url, _) = serve(vec![(503, "{}".into()), (503, "{}".into())]);
    let backend = http_backend(&url, 1);
    let err = backend.complete(&backend.request("p")).unwrap_err();
    assert!(matches!(err, GatewayError::Transport { attempts: 2, .. }), "{err:?}");
    assert_eq!(err.category(), "transport");
}

#[test]
fn bearer_token_and_length_finish() {
    let (url, seen) = serve(vec![(200, ok_body("cut", "length"))]);
    std::env::set_var("GATEWAY_TEST_KEY", "sekrit");
    let mut d = BackendDescriptor::http("remote", url.as_str(), "m");
    d.api_key_env = Some("GATEWAY_TEST_KEY".into());
    let backend = Backend::http(d).unwrap();
    let c = backend.complete(&backend.request("p")).unwrap();
    assert_eq!(c.finish_reason, FinishReason::Length);
    assert_eq!(seen.lock().unwrap()[0].auth.as_deref(), Some("Bearer sekrit"));
}

#[test]
fn batches_keep_request_order_under_parallelism() {
    let (url, _) = serve(vec![(200, ECHO.to_string()); 6]);
    let mut d = BackendDescriptor::http("remote", url.as_str(), "m");
    d.parallelism = 3;
    let backend = Backend::http(d).unwrap();
    let reqs: Vec<_> = (0..6).map(|i| backend.request(format!("p{i}"))).collect();
    let out = backend.complete_batch(&reqs);
    let texts: Vec<String> = out.into_iter().map(|r| r.unwrap().text).collect();
    assert_eq!(texts, ["p0", "p1", "p2", "p3", "p4", "p5"]);
}

#[test]
fn mock_stop_truncation_and_lookup() {
    let backend = common::mock(
        "m",
        false,
        vec![
            MockEntry::exact("promptX", "output: yes\n|EoS|"),
            MockEntry::prefix("instruction:", "prefixed"),
        ],
    );
    let c = backend.complete(&backend.request("promptX").with_stop("|EoS|")).unwrap();
    assert_eq!(c.text, "output: yes\n");
    let c = backend.complete(&backend.request("instruction: Name a color.\noutput:")).unwrap();
    assert_eq!(c.text, "prefixed");
    let err = backend.complete(&backend.request("nothing matches")).unwrap_err();
    assert!(matches!(err, GatewayError::ScriptMiss { .. }));
    assert_eq!(backend.mock_calls().len(), 3);
}

#[test]
fn mock_truncated_responses_report_length() {
    let mut entry = MockEntry::prefix_cycle("", vec!["whole".into(), "cut off".into()]);
    entry.truncated = vec![1];
    let backend = common::mock("m", false, vec![entry]);
    let reqs = vec![backend.request("a"), backend.request("b")];
    let out: Vec<_> = backend.complete_batch(&reqs).into_iter().map(Result::unwrap).collect();
    assert_eq!(out[0].finish_reason, FinishReason::Stop);
    assert_eq!(out[1].finish_reason, FinishReason::Length);
}

#[test]
fn duplicate_mock_matchers_are_rejected() {
    let r = Backend::script_mock(
        BackendDescriptor::mock("m", false),
        vec![MockEntry::prefix("a", "x"), MockEntry::prefix("a", "y")],
    );
    assert!(matches!(r, Err(GatewayError::DuplicateMatcher(_))));
}
