//! The HTTP chat backend against a local stub server that answers like a
//! chat-completions endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use ace_core::advisor::{HttpChat, HttpChatConfig};
use ace_core::textio::parse_actor_response;

fn serve(listener: TcpListener, replies: Vec<(u16, String)>) {
    for (status, body) in replies {
        let (mut stream, _) = listener.accept().expect("accept");
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut request = vec![0; length];
        reader.read_exact(&mut request).unwrap();
        let response = format!(
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(response.as_bytes()).unwrap();
    }
}

fn main() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let ok = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "1. Line 1 carries most of the transfer.\n3. proposed line changes: {3: 1}"}}]
    })
    .to_string();
    let server = thread::spawn(move || {
        serve(listener, vec![(429, "{}".into()), (503, "{}".into()), (200, ok)]);
    });

    let config = HttpChatConfig {
        backoff_ms: 10,
        api_key_env: None,
        ..HttpChatConfig::actor_default(&format!("http://{addr}/v1/chat/completions"), "stub-model")
    };
    let mut chat = HttpChat::new(config).unwrap();
    let reply = chat.chat("You are a grid operator.", "Line 1 is overloaded.").expect("third attempt succeeds");
    server.join().unwrap();
    println!("requests sent: {}", chat.requests_sent);
    println!("request body: {}", chat.last_request.as_deref().unwrap_or(""));
    println!("reply: {reply:?}");
    println!("parsed: {:?}", parse_actor_response(&reply));
}
