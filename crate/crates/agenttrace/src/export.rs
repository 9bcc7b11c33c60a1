//! Batching span exporter with local JSONL fallback.
//!
//! Producers call [`Exporter::enqueue`], which only takes a short lock. One
//! flusher thread ships batches; any batch that cannot be delivered is
//! appended to the fallback file as span lines, and if that fails too the
//! spans are counted as lost.

use std::collections::{BTreeMap, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use agenttrace_core::schema::{OpStatus, SurfaceBody};
use agenttrace_core::span::{event_to_span, ExportSpan};
use agenttrace_core::{LogEvent, SpanId};

pub const SPANS_PATH: &str = "/v1/spans";

#[derive(Debug, Clone, PartialEq)]
pub struct ExporterConfig {
    /// Base URL; spans go to `<endpoint>/v1/spans`. `None` sends every batch
    /// straight to the fallback file.
    pub endpoint: Option<String>,
    pub batch_max: usize,
    pub flush_interval_ms: u64,
    pub queue_cap: usize,
    pub fallback_path: PathBuf,
    pub shutdown_deadline_ms: u64,
}

impl Default for ExporterConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            batch_max: 512,
            flush_interval_ms: 1000,
            queue_cap: 8192,
            fallback_path: PathBuf::from("agenttrace-fallback.jsonl"),
            shutdown_deadline_ms: 5000,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("batch_max must be at least 1")]
    ZeroBatch,
    #[error("batch_max ({batch_max}) exceeds queue_cap ({queue_cap})")]
    BatchOverQueue { batch_max: usize, queue_cap: usize },
}

impl ExporterConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.batch_max == 0 {
            return Err(ConfigError::ZeroBatch);
        }
        if self.batch_max > self.queue_cap {
            return Err(ConfigError::BatchOverQueue {
                batch_max: self.batch_max,
                queue_cap: self.queue_cap,
            });
        }
        Ok(())
    }
}

/// Delivers one encoded batch (LF-delimited span lines).
pub trait Transport: Send {
    fn deliver(&mut self, body: &[u8], spans: &[ExportSpan]) -> Result<(), String>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).build();
        Self {
            agent: config.into(),
            url: format!("{}{SPANS_PATH}", endpoint.trim_end_matches('/')),
        }
    }
}

impl Transport for HttpTransport {
    fn deliver(&mut self, body: &[u8], _spans: &[ExportSpan]) -> Result<(), String> {
        self.agent
            .post(&self.url)
            .header("Content-Type", "application/x-ndjson")
            .send(body)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

/// Running totals. Once the exporter has shut down,
/// `delivered + degraded + lost == enqueued`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportOutcome {
    pub enqueued: u64,
    pub delivered: u64,
    pub degraded: u64,
    pub lost: u64,
    /// Calls made to the transport.
    pub delivery_attempts: u64,
    pub failed_attempts: u64,
}

#[derive(Default)]
struct Counters {
    enqueued: AtomicU64,
    delivered: AtomicU64,
    degraded: AtomicU64,
    lost: AtomicU64,
    attempts: AtomicU64,
    failures: AtomicU64,
}

#[derive(Default)]
struct Queue {
    spans: VecDeque<ExportSpan>,
    spill: Vec<Vec<ExportSpan>>,
    stopping: bool,
}

struct Shared {
    queue: Mutex<Queue>,
    wake: Condvar,
    counters: Counters,
}

pub struct Exporter {
    shared: Arc<Shared>,
    batch_max: usize,
    queue_cap: usize,
    thread: Option<JoinHandle<()>>,
}

impl Exporter {
    /// Starts the flusher. Without a transport every batch is degraded.
    pub fn start(config: ExporterConfig, transport: Option<Box<dyn Transport>>) -> Result<Exporter, ConfigError> {
        config.check()?;
        let shared = Arc::new(Shared {
            queue: Mutex::new(Queue::default()),
            wake: Condvar::new(),
            counters: Counters::default(),
        });
        let (batch_max, queue_cap) = (config.batch_max, config.queue_cap);
        let thread = {
            let shared = shared.clone();
            thread::Builder::new()
                .name("span-flusher".into())
                .spawn(move || Flusher { shared, config, transport }.run())
                .expect("spawn flusher thread")
        };
        Ok(Exporter {
            shared,
            batch_max,
            queue_cap,
            thread: Some(thread),
        })
    }

    /// Starts with an HTTP transport when the config names an endpoint.
    pub fn start_http(config: ExporterConfig) -> Result<Exporter, ConfigError> {
        let transport = config
            .endpoint
            .as_deref()
            .map(|e| Box::new(HttpTransport::new(e, Duration::from_secs(10))) as Box<dyn Transport>);
        Exporter::start(config, transport)
    }

    /// Queues a span. Never blocks on delivery; when the queue is over
    /// capacity the oldest batch is moved aside for the fallback file.
    pub fn enqueue(&self, span: ExportSpan) {
        self.shared.counters.enqueued.fetch_add(1, Ordering::Relaxed);
        let mut q = self.shared.queue.lock().unwrap_or_else(|p| p.into_inner());
        q.spans.push_back(span);
        if q.spans.len() > self.queue_cap {
            let batch: Vec<ExportSpan> = q.spans.drain(..self.batch_max).collect();
            q.spill.push(batch);
        }
        let wake = q.spans.len() >= self.batch_max || !q.spill.is_empty() || q.stopping;
        drop(q);
        if wake {
            self.shared.wake.notify_one();
        }
    }

    pub fn outcome(&self) -> ExportOutcome {
        let c = &self.shared.counters;
        ExportOutcome {
            enqueued: c.enqueued.load(Ordering::Relaxed),
            delivered: c.delivered.load(Ordering::Relaxed),
            degraded: c.degraded.load(Ordering::Relaxed),
            lost: c.lost.load(Ordering::Relaxed),
            delivery_attempts: c.attempts.load(Ordering::Relaxed),
            failed_attempts: c.failures.load(Ordering::Relaxed),
        }
    }

    /// Drains the queue (delivering until the configured deadline, degrading
    /// whatever is left) and returns the final totals.
    pub fn shutdown(mut self) -> ExportOutcome {
        self.stop();
        self.outcome()
    }

    fn stop(&mut self) {
        if let Some(t) = self.thread.take() {
            self.shared.queue.lock().unwrap_or_else(|p| p.into_inner()).stopping = true;
            self.shared.wake.notify_one();
            let _ = t.join();
            // Anything enqueued during the final drain.
            let leftover: Vec<ExportSpan> = {
                let mut q = self.shared.queue.lock().unwrap_or_else(|p| p.into_inner());
                let mut all: Vec<ExportSpan> = q.spill.drain(..).flatten().collect();
                all.extend(q.spans.drain(..));
                all
            };
            if !leftover.is_empty() {
                tracing::warn!(spans = leftover.len(), "spans arrived during shutdown; counted as lost");
                self.shared.counters.lost.fetch_add(leftover.len() as u64, Ordering::Relaxed);
            }
        }
    }
}

impl Drop for Exporter {
    fn drop(&mut self) {
        self.stop();
    }
}

struct Flusher {
    shared: Arc<Shared>,
    config: ExporterConfig,
    transport: Option<Box<dyn Transport>>,
}

impl Flusher {
    fn run(mut self) {
        let interval = Duration::from_millis(self.config.flush_interval_ms);
        let mut last_flush = Instant::now();
        let mut deadline: Option<Instant> = None;
        loop {
            let (spill, batch, stopping, remaining) = {
                let mut q = self.shared.queue.lock().unwrap_or_else(|p| p.into_inner());
                loop {
                    let due = last_flush.elapsed() >= interval && !q.spans.is_empty();
                    if q.stopping || due || q.spans.len() >= self.config.batch_max || !q.spill.is_empty() {
                        break;
                    }
                    let wait = interval.saturating_sub(last_flush.elapsed()).max(Duration::from_millis(1));
                    q = self
                        .shared
                        .wake
                        .wait_timeout(q, wait)
                        .unwrap_or_else(|p| p.into_inner())
                        .0;
                }
                let spill = std::mem::take(&mut q.spill);
                let take = if q.stopping || q.spans.len() >= self.config.batch_max || last_flush.elapsed() >= interval {
                    q.spans.len().min(self.config.batch_max)
                } else {
                    0
                };
                let batch: Vec<ExportSpan> = q.spans.drain(..take).collect();
                (spill, batch, q.stopping, q.spans.len())
            };

            for s in spill {
                self.degrade(&s);
            }
            if !batch.is_empty() {
                let past_deadline = deadline.is_some_and(|d| Instant::now() >= d);
                if past_deadline {
                    self.degrade(&batch);
                } else {
                    self.ship(&batch);
                }
                last_flush = Instant::now();
            }
            if stopping {
                deadline.get_or_insert_with(|| Instant::now() + Duration::from_millis(self.config.shutdown_deadline_ms));
                if remaining == 0 {
                    break;
                }
            }
        }
    }

    fn ship(&mut self, batch: &[ExportSpan]) {
        let Some(transport) = self.transport.as_mut() else {
            self.degrade(batch);
            return;
        };
        let body: String = batch.iter().map(ExportSpan::encode_line).collect();
        let c = &self.shared.counters;
        c.attempts.fetch_add(1, Ordering::Relaxed);
        match transport.deliver(body.as_bytes(), batch) {
            Ok(()) => {
                c.delivered.fetch_add(batch.len() as u64, Ordering::Relaxed);
            }
            Err(e) => {
                c.failures.fetch_add(1, Ordering::Relaxed);
                tracing::warn!(error = %e, spans = batch.len(), "span delivery failed; degrading to fallback");
                self.degrade(batch);
            }
        }
    }

    fn degrade(&self, batch: &[ExportSpan]) {
        let body: String = batch.iter().map(ExportSpan::encode_line).collect();
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.config.fallback_path)
            .and_then(|mut f| f.write_all(body.as_bytes()).and_then(|_| f.flush()));
        let c = &self.shared.counters;
        match written {
            Ok(()) => c.degraded.fetch_add(batch.len() as u64, Ordering::Relaxed),
            Err(e) => {
                tracing::error!(error = %e, path = %self.config.fallback_path.display(), "fallback write failed; spans lost");
                c.lost.fetch_add(batch.len() as u64, Ordering::Relaxed)
            }
        };
    }
}

/// Turns stored events into spans as they arrive: a start waits for its
/// terminal, everything else is exported at once. Starts still waiting at
/// [`LiveExport::finish`] go out as open spans.
pub struct LiveExport {
    exporter: Exporter,
    pending: BTreeMap<SpanId, LogEvent>,
    mirror: Option<PathBuf>,
}

impl LiveExport {
    /// `mirror` additionally appends contextual spans to that file.
    pub fn new(exporter: Exporter, mirror: Option<PathBuf>) -> Self {
        Self {
            exporter,
            pending: BTreeMap::new(),
            mirror,
        }
    }

    pub fn observe(&mut self, event: &LogEvent) {
        let span = match &event.body {
            SurfaceBody::Operational(op) if op.status == OpStatus::Start => {
                self.pending.entry(event.span_id).or_insert_with(|| event.clone());
                return;
            }
            SurfaceBody::Operational(_) => match self.pending.remove(&event.span_id) {
                Some(start) => event_to_span(&start, Some(event)),
                None => event_to_span(event, None),
            },
            SurfaceBody::Contextual(_) => {
                let span = event_to_span(event, None);
                if let Some(path) = &self.mirror {
                    let written = OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(path)
                        .and_then(|mut f| f.write_all(span.encode_line().as_bytes()));
                    if let Err(e) = written {
                        tracing::warn!(error = %e, "contextual mirror write failed");
                    }
                }
                span
            }
            SurfaceBody::Cognitive(_) => event_to_span(event, None),
        };
        self.exporter.enqueue(span);
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn finish(mut self) -> ExportOutcome {
        for start in std::mem::take(&mut self.pending).into_values() {
            self.exporter.enqueue(event_to_span(&start, None));
        }
        self.exporter.shutdown()
    }
}
