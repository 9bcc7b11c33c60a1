#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use agenttrace::export::{Exporter, ExporterConfig, Transport};
use agenttrace_core::span::{event_to_span, ExportSpan};
use agenttrace_core::SpanId;
use rand::Rng;

/// Records every delivered span id; fails a batch with probability `fail`.
struct Mock {
    seen: Arc<Mutex<Vec<SpanId>>>,
    rng: rand::rngs::StdRng,
    fail: f64,
    delay: Duration,
}

impl Transport for Mock {
    fn deliver(&mut self, body: &[u8], spans: &[ExportSpan]) -> Result<(), String> {
        std::thread::sleep(self.delay);
        if self.rng.gen_bool(self.fail) {
            return Err("injected".into());
        }
        let lines = body.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count();
        assert_eq!(lines, spans.len());
        self.seen.lock().unwrap().extend(spans.iter().map(|s| s.span_id));
        Ok(())
    }
}

fn spans(seed: u64, n: usize) -> Vec<ExportSpan> {
    let mut rng = support::rng(seed);
    (0..n).map(|_| event_to_span(&support::random_event(&mut rng), None)).collect()
}

fn config(dir: &Path, batch_max: usize, queue_cap: usize) -> ExporterConfig {
    ExporterConfig {
        endpoint: None,
        batch_max,
        flush_interval_ms: 20,
        queue_cap,
        fallback_path: dir.join("fallback.jsonl"),
        shutdown_deadline_ms: 10_000,
    }
}

fn fallback_ids(dir: &Path) -> Vec<SpanId> {
    std::fs::read_to_string(dir.join("fallback.jsonl"))
        .unwrap_or_default()
        .lines()
        .map(|l| ExportSpan::decode_line(l).unwrap().span_id)
        .collect()
}

fn start(dir: &Path, cfg: ExporterConfig, fail: f64, delay: Duration) -> (Exporter, Arc<Mutex<Vec<SpanId>>>) {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let mock = Mock {
        seen: seen.clone(),
        rng: support::rng(99),
        fail,
        delay,
    };
    let _ = dir;
    (Exporter::start(cfg, Some(Box::new(mock))).unwrap(), seen)
}

#[test]
fn ten_thousand_spans_delivered_exactly_once() {
    let dir = tempfile::tempdir().unwrap();
    let input = spans(1, 10_000);
    let (exporter, seen) = start(dir.path(), config(dir.path(), 256, 20_000), 0.0, Duration::ZERO);
    for s in &input {
        exporter.enqueue(s.clone());
    }
    let outcome = exporter.shutdown();
    assert_eq!((outcome.enqueued, outcome.delivered, outcome.degraded, outcome.lost), (10_000, 10_000, 0, 0));
    let mut got = seen.lock().unwrap().clone();
    let mut want: Vec<_> = input.iter().map(|s| s.span_id).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
    assert!(fallback_ids(dir.path()).is_empty());
}

#[test]
fn failed_batches_land_in_fallback_and_nowhere_else() {
    let dir = tempfile::tempdir().unwrap();
    let input = spans(2, 5_000);
    let (exporter, seen) = start(dir.path(), config(dir.path(), 100, 10_000), 0.5, Duration::ZERO);
    for s in &input {
        exporter.enqueue(s.clone());
    }
    let o = exporter.shutdown();
    assert_eq!(o.delivered + o.degraded + o.lost, o.enqueued);
    assert_eq!(o.lost, 0);
    assert!(o.failed_attempts > 0 && o.delivered > 0);
    let mut count: HashMap<SpanId, u32> = HashMap::new();
    for id in seen.lock().unwrap().iter().chain(fallback_ids(dir.path()).iter()) {
        *count.entry(*id).or_default() += 1;
    }
    assert_eq!(count.len(), input.len());
    assert!(count.values().all(|&c| c == 1));
}

#[test]
fn slow_transport_never_blocks_enqueue() {
    let dir = tempfile::tempdir().unwrap();
    let input = spans(3, 2_000);
    let mut cfg = config(dir.path(), 50, 200);
    cfg.shutdown_deadline_ms = 300;
    let (exporter, seen) = start(dir.path(), cfg, 0.0, Duration::from_millis(100));
    let begin = Instant::now();
    for s in &input {
        exporter.enqueue(s.clone());
    }
    assert!(begin.elapsed() < Duration::from_millis(500), "{:?}", begin.elapsed());
    let o = exporter.shutdown();
    assert_eq!(o.delivered + o.degraded + o.lost, 2_000);
    assert!(o.degraded > 0, "overflow spilled to the fallback file");
    assert_eq!(o.delivered as usize, seen.lock().unwrap().len());
    assert_eq!(o.degraded as usize, fallback_ids(dir.path()).len());
}

#[test]
fn unwritable_fallback_counts_as_lost() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 10, 100);
    cfg.fallback_path = dir.path().join("no-such-dir").join("fallback.jsonl");
    let (exporter, _) = start(dir.path(), cfg, 1.0, Duration::ZERO);
    for s in spans(4, 35) {
        exporter.enqueue(s);
    }
    let o = exporter.shutdown();
    assert_eq!((o.enqueued, o.delivered, o.degraded, o.lost), (35, 0, 0, 35));
}
