//! A tiny instrumented HTTP/1.1 server for exercising the gateway client.
//! One thread per connection, `Connection: close` on every response.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub body: Vec<u8>,
    /// 0-based arrival index across the server's lifetime.
    pub seq: usize,
}

impl Request {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }

    /// Number of logical items in a score or rewrite request.
    pub fn item_count(&self) -> usize {
        let v = self.json();
        v.get("pairs")
            .or_else(|| v.get("items"))
            .and_then(Value::as_array)
            .map_or(0, Vec::len)
    }
}

pub struct Response {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Response {
    pub fn ok(body: impl Into<String>) -> Self {
        Response {
            status: 200,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16, body: impl Into<String>) -> Self {
        Response {
            status,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

type Handler = dyn Fn(&Request) -> Response + Send + Sync;

pub struct MockServer {
    addr: String,
    log: Arc<Mutex<Vec<Request>>>,
    items: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
}

impl MockServer {
    pub fn start(handler: impl Fn(&Request) -> Response + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let log = Arc::new(Mutex::new(Vec::new()));
        let items = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let seq = Arc::new(AtomicUsize::new(0));
        {
            let (log, items, stop) = (log.clone(), items.clone(), stop.clone());
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let (log, items, handler, seq) =
                        (log.clone(), items.clone(), handler.clone(), seq.clone());
                    thread::spawn(move || serve(stream, &log, &items, &*handler, &seq));
                }
            });
        }
        MockServer {
            addr,
            log,
            items,
            stop,
        }
    }

    /// Scores every pair 0.5, echoes rewrite inputs, reports healthy.
    pub fn echo() -> Self {
        Self::start(echo_handler)
    }

    pub fn url(&self) -> &str {
        &self.addr
    }

    pub fn requests(&self) -> Vec<Request> {
        self.log.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn items_received(&self) -> usize {
        self.items.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // unblock accept()
        let _ = TcpStream::connect(self.addr.trim_start_matches("http://"));
    }
}

fn serve(
    stream: TcpStream,
    log: &Mutex<Vec<Request>>,
    items: &AtomicUsize,
    handler: &Handler,
    seq: &AtomicUsize,
) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_owned();
    let path = parts.next().unwrap_or("").to_owned();
    let mut length = 0usize;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header).unwrap_or(0) == 0 || header == "\r\n" {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let req = Request {
        method,
        path,
        body,
        seq: seq.fetch_add(1, Ordering::SeqCst),
    };
    items.fetch_add(req.item_count(), Ordering::SeqCst);
    log.lock().unwrap().push(req.clone());

    let resp = handler(&req);
    thread::sleep(resp.delay);
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        resp.status,
        resp.body.len(),
        resp.body
    );
    let _ = stream.flush();
}

pub fn echo_handler(req: &Request) -> Response {
    let v = req.json();
    match req.path.as_str() {
        "/v1/score" => {
            let n = v["pairs"].as_array().map_or(0, Vec::len);
            Response::ok(json!({ "scores": vec![0.5; n] }).to_string())
        }
        "/v1/rewrite" => {
            let outs: Vec<Value> = v["items"]
                .as_array()
                .map(|a| a.iter().map(|i| i["input"].clone()).collect())
                .unwrap_or_default();
            Response::ok(json!({ "outputs": outs }).to_string())
        }
        "/health" => Response::ok(r#"{"status":"ok","model_name":"echo"}"#),
        _ => Response::status(404, "{}"),
    }
}

/// Deterministic per-pair score so order can be checked: the premise is
/// expected to be `p<k>` and scores `k / 1000`.
pub fn indexed_score_handler(req: &Request) -> Response {
    let v = req.json();
    let scores: Vec<f64> = v["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["premise"].as_str().unwrap()[1..].parse::<f64>().unwrap() / 1000.0)
        .collect();
    Response::ok(json!({ "scores": scores }).to_string())
}
