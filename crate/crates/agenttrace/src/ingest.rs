//! Line pipeline shared by every ingest path: decode, validate, dedupe,
//! append. Also file ingest and the serialized appender thread.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use agenttrace_core::json::ObjectWriter;
use agenttrace_core::{decode_line, DecodeError, EventId, LogEvent};

use crate::store::{Appended, Store, StoreError};

pub const SAMPLE_LIMIT: usize = 10;
pub const FOLLOW_POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineError {
    Parse,
    Validation,
    Duplicate,
    /// The store refused the event (full or failing).
    Store,
}

impl LineError {
    pub fn as_str(self) -> &'static str {
        match self {
            LineError::Parse => "parse",
            LineError::Validation => "validation",
            LineError::Duplicate => "duplicate",
            LineError::Store => "store",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    /// 1-based line number within the source.
    pub line: u64,
    pub kind: LineError,
    pub reason: String,
}

/// Per-source tally. `accepted + parse_errors + validation_errors +
/// duplicates + store_errors` equals the number of lines processed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: u64,
    pub parse_errors: u64,
    pub validation_errors: u64,
    pub duplicates: u64,
    pub store_errors: u64,
    pub samples: Vec<Sample>,
}

impl IngestReport {
    pub fn lines(&self) -> u64 {
        self.accepted + self.parse_errors + self.validation_errors + self.duplicates + self.store_errors
    }

    pub fn error_count(&self) -> u64 {
        self.parse_errors + self.validation_errors
    }

    pub fn record_error(&mut self, line: u64, kind: LineError, reason: String) {
        match kind {
            LineError::Parse => self.parse_errors += 1,
            LineError::Validation => self.validation_errors += 1,
            LineError::Duplicate => self.duplicates += 1,
            LineError::Store => self.store_errors += 1,
        }
        if self.samples.len() < SAMPLE_LIMIT {
            self.samples.push(Sample { line, kind, reason });
        }
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.accepted += other.accepted;
        self.parse_errors += other.parse_errors;
        self.validation_errors += other.validation_errors;
        self.duplicates += other.duplicates;
        self.store_errors += other.store_errors;
        for s in &other.samples {
            if self.samples.len() < SAMPLE_LIMIT {
                self.samples.push(s.clone());
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let mut w = ObjectWriter::new(&mut out);
        w.int("accepted", self.accepted)
            .int("parse_errors", self.parse_errors)
            .int("validation_errors", self.validation_errors)
            .int("duplicates", self.duplicates)
            .int("store_errors", self.store_errors)
            .raw("samples", |out| {
                out.push('[');
                for (i, s) in self.samples.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let mut o = ObjectWriter::new(out);
                    o.int("line", s.line).str("kind", s.kind.as_str()).str("reason", &s.reason);
                    o.finish();
                }
                out.push(']');
            });
        w.finish();
        out
    }
}

/// Where validated events go.
pub trait EventSink {
    fn submit(&mut self, event: LogEvent) -> Result<Appended, StoreError>;
}

impl EventSink for Store {
    fn submit(&mut self, event: LogEvent) -> Result<Appended, StoreError> {
        self.append(&event)
    }
}

/// Validates without storing; duplicates are judged within the input only.
#[derive(Debug, Default)]
pub struct DryRun {
    seen: HashSet<EventId>,
}

impl EventSink for DryRun {
    fn submit(&mut self, event: LogEvent) -> Result<Appended, StoreError> {
        Ok(if self.seen.insert(event.event_id) {
            Appended::Stored
        } else {
            Appended::Duplicate
        })
    }
}

/// Runs one line (with or without its LF) through the pipeline.
pub fn process_line(report: &mut IngestReport, line_no: u64, line: &[u8], sink: &mut dyn EventSink) {
    match decode_line(line) {
        Err(DecodeError::Parse(msg)) => report.record_error(line_no, LineError::Parse, msg),
        Err(e @ DecodeError::Validation(_)) => report.record_error(line_no, LineError::Validation, e.to_string()),
        Ok(event) => {
            let id = event.event_id;
            match sink.submit(event) {
                Ok(Appended::Stored) => report.accepted += 1,
                Ok(Appended::Duplicate) => report.record_error(line_no, LineError::Duplicate, format!("event {id} already stored")),
                Err(e) => report.record_error(line_no, LineError::Store, e.to_string()),
            }
        }
    }
}

/// Processes a complete in-memory body. A final line without LF counts as a
/// line; a body ending in LF has no extra empty line.
pub fn process_bytes(body: &[u8], sink: &mut dyn EventSink) -> IngestReport {
    let mut report = IngestReport::default();
    for (i, line) in body.split_inclusive(|b| *b == b'\n').enumerate() {
        process_line(&mut report, i as u64 + 1, line, sink);
    }
    report
}

/// Reads a JSONL file through the pipeline.
///
/// Without `follow` the file is read to EOF and a trailing line without LF is
/// processed as the last line. With `follow` the reader keeps polling for
/// appended data until `follow` is set to false; a partial line is held until
/// its LF arrives, or processed as-is once following stops.
pub fn ingest_file(path: &Path, follow: Option<&AtomicBool>, sink: &mut dyn EventSink) -> io::Result<IngestReport> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut report = IngestReport::default();
    let mut line_no = 0u64;
    let mut buf = Vec::new();
    loop {
        let n = reader.read_until(b'\n', &mut buf)?;
        if buf.last() == Some(&b'\n') {
            line_no += 1;
            process_line(&mut report, line_no, &buf, sink);
            buf.clear();
            continue;
        }
        if n == 0 || !buf.is_empty() {
            match follow {
                Some(flag) if flag.load(Ordering::Acquire) => thread::sleep(FOLLOW_POLL),
                _ => break,
            }
        }
    }
    if !buf.is_empty() {
        line_no += 1;
        process_line(&mut report, line_no, &buf, sink);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Serialized appender

struct Request {
    event: LogEvent,
    reply: SyncSender<Result<Appended, StoreError>>,
}

/// Called with each newly stored event, on the appender thread.
pub type AppendHook = Box<dyn FnMut(&LogEvent) + Send>;

/// Sink that forwards to the appender thread over a bounded queue; a full
/// queue blocks the caller.
#[derive(Clone)]
pub struct AppenderHandle {
    tx: SyncSender<Request>,
}

impl EventSink for AppenderHandle {
    fn submit(&mut self, event: LogEvent) -> Result<Appended, StoreError> {
        let (reply, rx) = mpsc::sync_channel(1);
        let closed = || StoreError::Io(io::Error::new(io::ErrorKind::BrokenPipe, "appender stopped"));
        self.tx.send(Request { event, reply }).map_err(|_| closed())?;
        rx.recv().map_err(|_| closed())?
    }
}

pub struct Appender {
    handle: Option<AppenderHandle>,
    thread: JoinHandle<Store>,
}

impl Appender {
    /// Moves `store` onto a dedicated thread. The index is rewritten every
    /// `flush_interval` while events arrive.
    pub fn start(store: Store, queue_cap: usize, flush_interval: Duration, hook: Option<AppendHook>) -> Appender {
        let (tx, rx) = mpsc::sync_channel(queue_cap.max(1));
        let thread = thread::Builder::new()
            .name("appender".into())
            .spawn(move || run_appender(store, rx, flush_interval, hook))
            .expect("spawn appender thread");
        Appender {
            handle: Some(AppenderHandle { tx }),
            thread,
        }
    }

    pub fn handle(&self) -> AppenderHandle {
        self.handle.clone().expect("appender running")
    }

    /// Waits until every handle is dropped and the queue is empty, then
    /// returns the flushed store.
    pub fn finish(mut self) -> Store {
        self.handle.take();
        self.thread.join().expect("appender thread panicked")
    }
}

fn run_appender(mut store: Store, rx: Receiver<Request>, flush_interval: Duration, mut hook: Option<AppendHook>) -> Store {
    let mut dirty = false;
    loop {
        match rx.recv_timeout(flush_interval) {
            Ok(Request { event, reply }) => {
                let result = store.append(&event);
                if let (Ok(Appended::Stored), Some(h)) = (&result, hook.as_mut()) {
                    h(&event);
                }
                dirty |= matches!(result, Ok(Appended::Stored));
                let _ = reply.send(result);
            }
            Err(RecvTimeoutError::Timeout) => {
                if dirty {
                    if let Err(e) = store.flush() {
                        tracing::warn!(error = %e, "periodic store flush failed");
                    }
                    dirty = false;
                }
            }
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    if let Err(e) = store.flush() {
        tracing::warn!(error = %e, "final store flush failed");
    }
    store
}
