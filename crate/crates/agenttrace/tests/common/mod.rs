#![allow(dead_code)]

use std::fs;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::time::Duration;

use agenttrace::ingest::{Appender, IngestReport};
use agenttrace::net::{HttpServer, StreamServer, DEFAULT_MAX_BODY};
use agenttrace::store::{segment_name, Store, StoreOptions, INDEX_FILE};

/// Store, appender, and both listeners on ephemeral ports.
pub struct Stack {
    pub appender: Appender,
    pub stream: StreamServer,
    pub http: HttpServer,
}

impl Stack {
    pub fn start(dir: &Path, max_body: usize) -> Stack {
        let store = Store::open(dir, StoreOptions::default()).unwrap();
        let appender = Appender::start(store, 64, Duration::from_millis(20), None);
        let stream = StreamServer::bind("127.0.0.1:0", appender.handle()).unwrap();
        let http = HttpServer::bind("127.0.0.1:0", appender.handle(), max_body).unwrap();
        Stack { appender, stream, http }
    }

    pub fn default_at(dir: &Path) -> Stack {
        Stack::start(dir, DEFAULT_MAX_BODY)
    }

    /// Stops listeners and returns (stream reports, http totals, store).
    pub fn stop(self) -> (Vec<IngestReport>, IngestReport, Store) {
        let stream = self.stream.shutdown().into_iter().map(|(_, r)| r).collect();
        let http = self.http.shutdown();
        let store = self.appender.finish();
        (stream, http, store)
    }
}

pub fn send_stream(addr: SocketAddr, bytes: &[u8]) {
    let mut conn = TcpStream::connect(addr).unwrap();
    conn.write_all(bytes).unwrap();
    conn.shutdown(std::net::Shutdown::Write).unwrap();
    // Wait for the server to close its side so every line has been handled.
    let mut sink = Vec::new();
    let _ = conn.read_to_end(&mut sink);
}

pub fn post(addr: SocketAddr, path: &str, body: &[u8]) -> (u16, String) {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .post(&format!("http://{addr}{path}"))
        .send(body)
        .unwrap();
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().unwrap_or_default();
    (status, text)
}

/// Segment bytes (concatenated in order) and the index document.
pub fn store_state(dir: &Path) -> (Vec<u8>, String) {
    let mut bytes = Vec::new();
    let mut n = 0;
    while let Ok(b) = fs::read(dir.join(segment_name(n))) {
        bytes.extend(b);
        n += 1;
    }
    (bytes, fs::read_to_string(dir.join(INDEX_FILE)).unwrap_or_default())
}

pub fn report_of(json: &str) -> (u64, u64, u64, u64) {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    let n = |k: &str| v[k].as_u64().unwrap();
    (n("accepted"), n("parse_errors"), n("validation_errors"), n("duplicates"))
}
