use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use ace_core::advisor::{BackendError, HttpChat, HttpChatConfig};

struct Request {
    headers: Vec<String>,
    body: serde_json::Value,
}

fn read_request(stream: &TcpStream) -> Request {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut headers = Vec::new();
    let mut length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            length = v.trim().parse().unwrap();
        }
        headers.push(lower.trim().to_string());
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    Request {
        headers,
        body: serde_json::from_slice(&body).unwrap(),
    }
}

fn reply(mut stream: TcpStream, status: u16, body: &str) {
    let response = format!(
        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).unwrap();
}

fn completion(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

/// Serves `replies` in order; `None` holds the connection open without answering.
fn stub(replies: Vec<Option<(u16, String)>>) -> (SocketAddr, mpsc::Receiver<Request>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    let handle = thread::spawn(move || {
        let mut held = Vec::new();
        for r in replies {
            let (stream, _) = listener.accept().unwrap();
            let request = read_request(&stream);
            tx.send(request).unwrap();
            match r {
                Some((status, body)) => reply(stream, status, &body),
                None => held.push(stream),
            }
        }
        thread::sleep(Duration::from_millis(300));
    });
    (addr, rx, handle)
}

fn config(addr: SocketAddr) -> HttpChatConfig {
    HttpChatConfig {
        backoff_ms: 5,
        timeout_ms: 2_000,
        api_key_env: None,
        ..HttpChatConfig::actor_default(&format!("http://{addr}/v1/chat/completions"), "stub-model")
    }
}

#[test]
fn request_shape_and_reply_content() {
    let (addr, rx, server) = stub(vec![Some((200, completion("proposed line changes: {3: 1}")))]);
    let mut chat = HttpChat::new(config(addr)).unwrap();
    let text = chat.chat("system text", "user text").unwrap();
    server.join().unwrap();
    assert_eq!(text, "proposed line changes: {3: 1}");
    assert_eq!(chat.requests_sent, 1);
    let req = rx.recv().unwrap();
    assert_eq!(req.body["model"], "stub-model");
    assert_eq!(req.body["max_tokens"], 5120);
    assert_eq!(req.body["temperature"], 0.0);
    assert_eq!(req.body["messages"][0]["role"], "system");
    assert_eq!(req.body["messages"][0]["content"], "system text");
    assert_eq!(req.body["messages"][1]["role"], "user");
    assert_eq!(req.body["messages"][1]["content"], "user text");
    assert!(req.headers.iter().any(|h| h == "content-type: application/json"));
    assert!(!req.headers.iter().any(|h| h.starts_with("authorization:")));
}

#[test]
fn bearer_token_is_taken_from_the_environment() {
    let var = "ACE_HTTP_BACKEND_TEST_TOKEN";
    std::env::set_var(var, "s3cret");
    let (addr, rx, server) = stub(vec![Some((200, completion("ok")))]);
    let mut chat = HttpChat::new(HttpChatConfig {
        api_key_env: Some(var.into()),
        ..config(addr)
    })
    .unwrap();
    chat.chat("s", "u").unwrap();
    server.join().unwrap();
    assert!(rx.recv().unwrap().headers.iter().any(|h| h == "authorization: bearer s3cret"));
}

#[test]
fn rate_limits_are_retried() {
    let (addr, rx, server) = stub(vec![
        Some((429, "{}".into())),
        Some((429, "{}".into())),
        Some((200, completion("third time"))),
    ]);
    let mut chat = HttpChat::new(config(addr)).unwrap();
    assert_eq!(chat.chat("s", "u").unwrap(), "third time");
    server.join().unwrap();
    assert_eq!(chat.requests_sent, 3);
    assert_eq!(rx.iter().count(), 3);
}

#[test]
fn persistent_server_errors_exhaust_the_attempts() {
    let (addr, _rx, server) = stub(vec![Some((503, "{}".into())); 3]);
    let mut chat = HttpChat::new(config(addr)).unwrap();
    let err = chat.chat("s", "u").unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Exhausted { attempts: 3, .. }), "{err}");
    assert_eq!(chat.requests_sent, 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (addr, _rx, server) = stub(vec![Some((400, "bad request".into()))]);
    let mut chat = HttpChat::new(config(addr)).unwrap();
    let err = chat.chat("s", "u").unwrap_err();
    server.join().unwrap();
    assert_eq!(
        err,
        BackendError::Status {
            status: 400,
            body: "bad request".into()
        }
    );
    assert_eq!(chat.requests_sent, 1);
}

#[test]
fn silent_server_times_out() {
    let (addr, _rx, server) = stub(vec![None, None]);
    let mut chat = HttpChat::new(HttpChatConfig {
        timeout_ms: 150,
        max_attempts: 2,
        ..config(addr)
    })
    .unwrap();
    let err = chat.chat("s", "u").unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Exhausted { attempts: 2, .. }), "{err}");
    assert_eq!(chat.requests_sent, 2);
}

#[test]
fn malformed_body_is_reported() {
    let (addr, _rx, server) = stub(vec![Some((200, "{\"choices\": []}".into()))]);
    let mut chat = HttpChat::new(config(addr)).unwrap();
    let err = chat.chat("s", "u").unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Malformed(_)));
}

#[test]
fn zero_attempts_is_a_config_error() {
    let cfg = HttpChatConfig {
        max_attempts: 0,
        ..HttpChatConfig::critic_default("http://127.0.0.1:9/", "m")
    };
    assert!(matches!(HttpChat::new(cfg), Err(BackendError::Config(_))));
}
