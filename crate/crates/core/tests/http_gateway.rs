#![cfg(feature = "http")]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use geobench::dataset::ImageRecord;
use geobench::gateway::{EndpointConfig, Gateway, GatewayError, RunLog, VirtualClock};
use geobench::geo::GeoCoordinate;
use geobench::prompt::{render, PromptStrategy, StrategyKind};
use serde_json::Value;

struct Captured {
    path: String,
    headers: Vec<String>,
    body: Value,
}

/// Serves one canned `(status, body)` per connection and hands back what
/// each request carried.
fn serve(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<Captured>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut captured = Vec::new();
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut headers = Vec::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push(line.to_ascii_lowercase());
            }
            let mut payload = vec![0; length];
            reader.read_exact(&mut payload).unwrap();
            captured.push(Captured {
                path: request_line.split_whitespace().nth(1).unwrap().to_string(),
                headers,
                body: serde_json::from_slice(&payload).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        captured
    });
    (base, handle)
}

fn fixture() -> (tempfile::NamedTempFile, ImageRecord) {
    let mut img = tempfile::Builder::new().suffix(".png").tempfile().unwrap();
    img.write_all(b"\x89PNG fake").unwrap();
    let uri = img.path().to_str().unwrap().to_string();
    let record = ImageRecord::new("r1", uri, GeoCoordinate::new(48.85, 2.35).unwrap(), "FR");
    (img, record)
}

fn gateway(base: &str, token_env: Option<&str>) -> (Gateway, Arc<VirtualClock>) {
    let mut config = EndpointConfig::new("local", base);
    config.model = Some("vision-small".into());
    config.auth_token_env = token_env.map(String::from);
    let clock = Arc::new(VirtualClock::starting_at(0));
    let gw = Gateway::new(vec![config], RunLog::discard())
        .unwrap()
        .with_clock(clock.clone());
    (gw, clock)
}

#[test]
fn retries_a_throttled_request_over_real_http() {
    let reply = serde_json::json!({"choices": [{"message": {"content": "Latitude and Longitude: 48.8584, 2.2945"}}]});
    let (base, server) = serve(vec![(429, "{}".into()), (200, reply.to_string())]);
    let (img, record) = fixture();
    let (gw, clock) = gateway(&base, None);
    let prompt = render(
        &PromptStrategy::new(StrategyKind::ZeroShot),
        img.path().to_str().unwrap(),
    )
    .unwrap();
    let out = gw.query("local", &prompt, &record).unwrap();
    assert_eq!(out.attempt_count, 2);
    assert_eq!(out.raw_text, "Latitude and Longitude: 48.8584, 2.2945");
    assert_eq!(clock.sleeps().len(), 1);

    let captured = server.join().unwrap();
    assert_eq!(captured.len(), 2);
    let req = &captured[1];
    assert_eq!(req.path, "/v1/chat/completions");
    assert!(!req.headers.iter().any(|h| h.starts_with("authorization")));
    assert_eq!(req.body["model"], "vision-small");
    assert_eq!(req.body["temperature"], 0.0);
    let content = &req.body["messages"][0]["content"];
    assert_eq!(content[0]["text"], prompt.text);
    assert!(content[1]["image_url"]["url"]
        .as_str()
        .unwrap()
        .starts_with("data:image/png;base64,"));
}

#[test]
fn unauthorized_request_fails_without_retry() {
    let (base, server) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let (img, record) = fixture();
    std::env::set_var("GEOBENCH_TEST_TOKEN", "secret");
    let (gw, clock) = gateway(&base, Some("GEOBENCH_TEST_TOKEN"));
    let prompt = render(
        &PromptStrategy::new(StrategyKind::FewShot),
        img.path().to_str().unwrap(),
    )
    .unwrap();
    let err = gw.query("local", &prompt, &record).unwrap_err();
    assert!(
        matches!(err, GatewayError::AuthFailure { status: 401 }),
        "{err:?}"
    );
    assert!(clock.sleeps().is_empty());
    let captured = server.join().unwrap();
    assert_eq!(captured.len(), 1);
    assert!(captured[0]
        .headers
        .contains(&"authorization: bearer secret".to_string()));
}
