use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use icda::corpus::LabeledExample;
use icda::generator::{
    build_prompts, generate, BackendError, CompletionRequest, GenerationBackend, GenerationSettings, GeneratorError,
    HttpBackend, MultiplierPlan,
};

struct Seen {
    path: String,
    headers: Vec<(String, String)>,
    body: CompletionRequest,
}

/// Serves `handler(request_no, request)` as `(status, body)` until the test ends.
fn serve<F>(handler: F) -> (String, Arc<Mutex<Vec<Seen>>>)
where
    F: Fn(usize, &CompletionRequest) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let count = AtomicUsize::new(0);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut headers = Vec::new();
            let mut length = 0;
            loop {
                line.clear();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                let (k, v) = l.split_once(':').unwrap();
                let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
                if k == "content-length" {
                    length = v.parse().unwrap();
                }
                headers.push((k, v));
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let request: CompletionRequest = serde_json::from_slice(&body).unwrap();
            let (status, reply) = handler(count.fetch_add(1, Ordering::SeqCst), &request);
            log.lock().unwrap().push(Seen { path, headers, body: request });
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn completions(n: usize, tag: &str) -> String {
    let items: Vec<String> = (0..n).map(|i| format!("\"{tag} utterance {i}\\nExample: junk\"")).collect();
    format!("{{\"completions\": [{}]}}", items.join(","))
}

fn request(n: usize) -> CompletionRequest {
    CompletionRequest {
        prompt: "Intent: alarm set\nExample:".into(),
        n,
        typical_p: 0.9,
        repetition_penalty: 1.1,
        max_new_tokens: 32,
        stop: vec!["\n".into()],
        seed: 42,
    }
}

#[test]
fn posts_json_with_auth_and_parses_completions() {
    let (url, seen) = serve(|_, r| (200, completions(r.n, "x")));
    let backend = HttpBackend::new(
        url,
        Some(("Authorization".into(), "Bearer sesame".into())),
        Duration::from_secs(5),
    )
    .unwrap();
    let out = backend.complete(&request(3)).unwrap();
    assert_eq!(out.len(), 3);
    assert_eq!(out[0], "x utterance 0\nExample: junk");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].path, "/generate");
    assert_eq!(seen[0].body, request(3));
    assert!(seen[0].headers.contains(&("authorization".into(), "Bearer sesame".into())));
    assert!(seen[0].headers.iter().any(|(k, v)| k == "content-type" && v.starts_with("application/json")));
}

#[test]
fn error_statuses_are_classified() {
    let (url, _) = serve(|i, _| match i {
        0 => (503, "busy".into()),
        1 => (401, "no".into()),
        _ => (200, "{\"nope\": 1}".into()),
    });
    let backend = HttpBackend::new(url, None, Duration::from_secs(5)).unwrap();
    let e = backend.complete(&request(1)).unwrap_err();
    assert!(matches!(&e, BackendError::Status { status: 503, excerpt } if excerpt == "busy"));
    assert!(e.is_retryable());
    let e = backend.complete(&request(1)).unwrap_err();
    assert!(matches!(e, BackendError::Status { status: 401, .. }) && !e.is_retryable());
    assert!(matches!(backend.complete(&request(1)), Err(BackendError::Malformed(_))));
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = HttpBackend::new(format!("http://127.0.0.1:{port}/x"), None, Duration::from_secs(2)).unwrap();
    assert!(matches!(backend.complete(&request(1)), Err(BackendError::Transport(_))));
}

fn seeds() -> Vec<LabeledExample> {
    vec![
        LabeledExample::seed("wake me at six", "alarm_set"),
        LabeledExample::seed("set an alarm for noon", "alarm_set"),
    ]
}

#[test]
fn generation_retries_transient_failures_and_cleans_output() {
    let (url, seen) = serve(|i, r| if i == 0 { (503, "later".into()) } else { (200, completions(r.n, "ok")) });
    let backend = HttpBackend::new(url, None, Duration::from_secs(5)).unwrap();
    let seeds = seeds();
    let plan = MultiplierPlan::new(2, &seeds).unwrap();
    let settings = GenerationSettings {
        retry_backoff: Duration::from_millis(1),
        ..GenerationSettings::default()
    };
    let out = generate(&backend, &plan, &build_prompts(&seeds).unwrap(), &settings, 3).unwrap();
    assert_eq!(out.requests, 2);
    let texts: Vec<&str> = out.examples.iter().map(|e| e.text.as_str()).collect();
    assert_eq!(texts, ["ok utterance 0", "ok utterance 1", "ok utterance 2", "ok utterance 3"]);
    assert_eq!(seen.lock().unwrap()[1].body.n, 4);
}

#[test]
fn generation_reports_exhausted_retries() {
    let (url, _) = serve(|_, _| (500, "down".into()));
    let backend = HttpBackend::new(url, None, Duration::from_secs(5)).unwrap();
    let seeds = seeds();
    let settings = GenerationSettings {
        max_attempts: 2,
        retry_backoff: Duration::from_millis(1),
        ..GenerationSettings::default()
    };
    let err = generate(
        &backend,
        &MultiplierPlan::new(1, &seeds).unwrap(),
        &build_prompts(&seeds).unwrap(),
        &settings,
        0,
    )
    .unwrap_err();
    match err {
        GeneratorError::Backend { intent, attempts, progress, .. } => {
            assert_eq!(intent, "alarm_set");
            assert_eq!(attempts, 2);
            assert_eq!(progress["alarm_set"], (0, 2));
        }
        other => panic!("unexpected {other}"),
    }
}
