//! Socket and HTTP ingest listeners feeding an [`AppenderHandle`].

use std::io::{self, BufRead, BufReader, Read};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::ingest::{process_bytes, process_line, AppenderHandle, EventSink, IngestReport, LineError};

pub const DEFAULT_MAX_BODY: usize = 16 * 1024 * 1024;
pub const INGEST_PATH: &str = "/v1/ingest";
const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, thiserror::Error)]
#[error("cannot bind {addr}: {source}")]
pub struct BindError {
    pub addr: String,
    #[source]
    pub source: io::Error,
}

/// Finished connection tallies, in completion order.
pub type ConnectionReports = Arc<Mutex<Vec<(SocketAddr, IngestReport)>>>;

pub struct StreamServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    reports: ConnectionReports,
    thread: Option<JoinHandle<()>>,
}

impl StreamServer {
    pub fn bind(addr: impl ToSocketAddrs + ToString, sink: AppenderHandle) -> Result<StreamServer, BindError> {
        let shown = addr.to_string();
        let bind_err = |source| BindError {
            addr: shown.clone(),
            source,
        };
        let listener = TcpListener::bind(addr).map_err(bind_err)?;
        listener.set_nonblocking(true).map_err(bind_err)?;
        let local = listener.local_addr().map_err(bind_err)?;
        let stop = Arc::new(AtomicBool::new(false));
        let reports = ConnectionReports::default();
        let thread = {
            let (stop, reports) = (stop.clone(), reports.clone());
            thread::Builder::new()
                .name("stream-accept".into())
                .spawn(move || accept_loop(listener, sink, stop, reports))
                .map_err(bind_err)?
        };
        Ok(StreamServer {
            addr: local,
            stop,
            reports,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn reports(&self) -> ConnectionReports {
        self.reports.clone()
    }

    /// Stops accepting, lets open connections notice within one poll, and
    /// waits for them.
    pub fn shutdown(mut self) -> Vec<(SocketAddr, IngestReport)> {
        self.stop.store(true, Ordering::Release);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        std::mem::take(&mut *self.reports.lock().unwrap())
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn accept_loop(listener: TcpListener, sink: AppenderHandle, stop: Arc<AtomicBool>, reports: ConnectionReports) {
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    while !stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((conn, peer)) => {
                let (mut sink, stop, reports) = (sink.clone(), stop.clone(), reports.clone());
                workers.push(thread::spawn(move || {
                    let report = serve_connection(conn, &mut sink, &stop);
                    tracing::debug!(%peer, accepted = report.accepted, "stream connection closed");
                    reports.lock().unwrap().push((peer, report));
                }));
                workers.retain(|w| !w.is_finished());
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                tracing::warn!(error = %e, "accept failed");
                thread::sleep(POLL);
            }
        }
    }
    for w in workers {
        let _ = w.join();
    }
}

/// Reads LF-delimited lines until the peer closes (or the server stops). A
/// partial line left at close is a parse error.
pub fn serve_connection(conn: TcpStream, sink: &mut dyn EventSink, stop: &AtomicBool) -> IngestReport {
    let mut report = IngestReport::default();
    if conn.set_nonblocking(false).and_then(|_| conn.set_read_timeout(Some(POLL))).is_err() {
        return report;
    }
    let mut reader = BufReader::new(conn);
    let mut buf = Vec::new();
    let mut line_no = 0u64;
    loop {
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) if buf.last() == Some(&b'\n') => {
                line_no += 1;
                process_line(&mut report, line_no, &buf, sink);
                buf.clear();
            }
            Ok(_) => {}
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                if stop.load(Ordering::Acquire) {
                    break;
                }
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => {
                tracing::debug!(error = %e, "stream read failed");
                break;
            }
        }
    }
    if !buf.is_empty() {
        report.record_error(line_no + 1, LineError::Parse, "connection closed mid-line".into());
    }
    report
}

// ---------------------------------------------------------------------------
// HTTP

pub struct HttpServer {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    totals: Arc<Mutex<IngestReport>>,
    thread: Option<JoinHandle<()>>,
}

impl HttpServer {
    pub fn bind(addr: &str, sink: AppenderHandle, max_body: usize) -> Result<HttpServer, BindError> {
        let bind_err = |source| BindError {
            addr: addr.to_string(),
            source,
        };
        // Bind ourselves so the error is a real io::Error.
        let listener = TcpListener::bind(addr).map_err(bind_err)?;
        let local = listener.local_addr().map_err(bind_err)?;
        let server = tiny_http::Server::from_listener(listener, None)
            .map_err(|e| bind_err(io::Error::other(e.to_string())))?;
        let server = Arc::new(server);
        let totals = Arc::new(Mutex::new(IngestReport::default()));
        let thread = {
            let (server, totals) = (server.clone(), totals.clone());
            thread::Builder::new()
                .name("http-ingest".into())
                .spawn(move || {
                    let mut workers: Vec<JoinHandle<()>> = Vec::new();
                    for request in server.incoming_requests() {
                        let (mut sink, totals) = (sink.clone(), totals.clone());
                        workers.push(thread::spawn(move || {
                            if let Some(report) = handle_request(request, &mut sink, max_body) {
                                totals.lock().unwrap().merge(&report);
                            }
                        }));
                        workers.retain(|w| !w.is_finished());
                    }
                    for w in workers {
                        let _ = w.join();
                    }
                })
                .map_err(bind_err)?
        };
        Ok(HttpServer {
            addr: local,
            server,
            totals,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Sum of all batch reports so far.
    pub fn totals(&self) -> IngestReport {
        self.totals.lock().unwrap().clone()
    }

    /// Stops accepting requests, waits for in-flight ones, and returns the
    /// summed reports.
    pub fn shutdown(mut self) -> IngestReport {
        self.stop();
        self.totals()
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn json_response(status: u16, body: String) -> tiny_http::Response<io::Cursor<Vec<u8>>> {
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    tiny_http::Response::from_string(body).with_status_code(status).with_header(header)
}

fn error_body(msg: &str) -> String {
    let mut out = String::new();
    let mut w = agenttrace_core::json::ObjectWriter::new(&mut out);
    w.str("error", msg);
    w.finish();
    out
}

fn handle_request(mut request: tiny_http::Request, sink: &mut dyn EventSink, max_body: usize) -> Option<IngestReport> {
    let mut report = None;
    let response = if request.url() != INGEST_PATH {
        json_response(404, error_body("not found"))
    } else if *request.method() != tiny_http::Method::Post {
        json_response(405, error_body("use POST"))
    } else if request.body_length().is_some_and(|n| n > max_body) {
        json_response(413, error_body("body exceeds size cap"))
    } else {
        let mut body = Vec::new();
        let read = request
            .as_reader()
            .take(max_body as u64 + 1)
            .read_to_end(&mut body);
        match read {
            Err(e) => json_response(400, error_body(&format!("cannot read body: {e}"))),
            Ok(_) if body.len() > max_body => json_response(413, error_body("body exceeds size cap")),
            Ok(_) if body.is_empty() => json_response(400, error_body("empty body")),
            Ok(_) => {
                let r = process_bytes(&body, sink);
                let text = r.to_json();
                report = Some(r);
                json_response(200, text)
            }
        }
    };
    if let Err(e) = request.respond(response) {
        tracing::debug!(error = %e, "http respond failed");
    }
    report
}
