#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

pub struct StubRequest {
    pub path: String,
    pub body: String,
    pub authorization: Option<String>,
}

type Handler = dyn Fn(&StubRequest) -> (u16, String) + Send + Sync;

/// Local HTTP/1.1 server answering every request through `handler`.
///
/// One thread per connection, one request per connection (`Connection: close`).
pub struct Stub {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    thread: Option<JoinHandle<()>>,
}

fn read_request(stream: &TcpStream) -> std::io::Result<StubRequest> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let (mut length, mut authorization) = (0usize, None);
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line.trim_end().is_empty() {
            break;
        }
        let Some((name, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim();
        if name.eq_ignore_ascii_case("content-length") {
            length = value.parse().unwrap_or(0);
        } else if name.eq_ignore_ascii_case("authorization") {
            authorization = Some(value.to_string());
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    Ok(StubRequest {
        path,
        body: String::from_utf8_lossy(&body).into_owned(),
        authorization,
    })
}

fn serve(mut stream: TcpStream, handler: &Handler, hits: &AtomicUsize) {
    let Ok(req) = read_request(&stream) else {
        return;
    };
    hits.fetch_add(1, Ordering::SeqCst);
    let (status, reply) = handler(&req);
    let head = format!(
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reply.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(reply.as_bytes());
}

impl Stub {
    pub fn start(handler: impl Fn(&StubRequest) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let addr = listener.local_addr().expect("local addr");
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let (h, st) = (hits.clone(), stop.clone());
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if st.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let (handler, h) = (handler.clone(), h.clone());
                std::thread::spawn(move || serve(stream, &*handler, &h));
            }
        });
        Stub {
            url: format!("http://{addr}"),
            hits,
            stop,
            addr,
            thread: Some(thread),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop so it sees the flag
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Text of the `{{Output}}` slot of a rendered judge prompt.
pub fn judged_output(prompt: &str) -> &str {
    let start = prompt
        .find("### Corresponding Output:\n")
        .map(|i| i + "### Corresponding Output:\n".len())
        .unwrap_or(0);
    let end = prompt.rfind("\n\nEvaluation Form").unwrap_or(prompt.len());
    &prompt[start..end.max(start)]
}

/// Judge stub: longer outputs get better (lower) scores, deterministically.
pub fn chat_reply(body: &str) -> (u16, String) {
    let v: serde_json::Value = serde_json::from_str(body).expect("json body");
    let prompt = v["messages"][0]["content"].as_str().unwrap_or_default();
    let words = judged_output(prompt).split_whitespace().count();
    let score = match words {
        0..=3 => 4,
        4..=7 => 3,
        8..=12 => 2,
        _ => 1,
    };
    let reply = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": format!("- Quality: {score}")}}]
    });
    (200, reply.to_string())
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}
