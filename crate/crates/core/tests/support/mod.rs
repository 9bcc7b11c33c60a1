//! Random event, forest, and mutation generators shared by integration and
//! acceptance tests. Each generator records its own ground truth so tests
//! compare against that record rather than against the code under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use agenttrace_core::schema::{
    CognitiveBody, ContextualBody, ContextualOp, ExtractionStrategy, Level, LogEvent,
    OperationalBody, Surface, SurfaceBody,
};
use agenttrace_core::assembly::{Assembly, Outcome, StatsSummary};
use agenttrace_core::{EventId, SpanId, Timestamp, TraceId};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

const ALPHABET: &[&str] = &[
    "a", "b", "z", "Q", "0", "9", " ", "_", "-", ".", "/", ":", "\"", "\\", "\n", "\t", "\r",
    "\u{1}", "\u{1f}", "é", "ß", "中", "😀", "\u{2028}", "{", "}", "[", "]", ",", "…",
];

pub fn text(rng: &mut StdRng, max_chars: usize) -> String {
    let n = rng.gen_range(0..=max_chars);
    (0..n).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

pub fn non_empty_text(rng: &mut StdRng, max_chars: usize) -> String {
    loop {
        let t = text(rng, max_chars.max(1));
        if !t.is_empty() {
            return t;
        }
    }
}

fn maybe<T>(rng: &mut StdRng, f: impl FnOnce(&mut StdRng) -> T) -> Option<T> {
    if rng.gen_bool(0.5) {
        Some(f(rng))
    } else {
        None
    }
}

pub fn float(rng: &mut StdRng) -> f64 {
    match rng.gen_range(0..5) {
        0 => 0.0,
        1 => rng.gen_range(0..100_000) as f64 / 1000.0,
        2 => rng.gen::<f64>() * 1e6,
        3 => rng.gen::<f64>() * 1e-9,
        _ => rng.gen::<f64>() * 1e22,
    }
}

pub fn timestamp(rng: &mut StdRng) -> Timestamp {
    let micros = rng.gen_range(Timestamp::MIN.as_unix_micros()..=Timestamp::MAX.as_unix_micros());
    Timestamp::from_unix_micros(micros).unwrap()
}

pub fn operational_body(rng: &mut StdRng) -> OperationalBody {
    let method = non_empty_text(rng, 12);
    let mut body = match rng.gen_range(0..3) {
        0 => OperationalBody::start(method),
        1 => OperationalBody::complete(method, float(rng)),
        _ => OperationalBody::error(method, float(rng), text(rng, 40)),
    };
    body.arg_count = maybe(rng, |r| r.gen_range(0..10));
    body.args_summary = maybe(rng, |r| text(r, 60));
    body.result_type = maybe(rng, |r| text(r, 10));
    body.result_summary = maybe(rng, |r| text(r, 60));
    body
}

pub fn cognitive_body(rng: &mut StdRng) -> CognitiveBody {
    let strategy = *ExtractionStrategy::ALL.choose(rng).unwrap();
    let mut body = CognitiveBody::empty(strategy);
    body.thought = maybe(rng, |r| text(r, 80));
    body.plan = maybe(rng, |r| text(r, 80));
    body.reflection = maybe(rng, |r| text(r, 80));
    if strategy != ExtractionStrategy::None {
        body.thought = Some(non_empty_text(rng, 80));
    }
    body.model = maybe(rng, |r| text(r, 12));
    body.prompt_tokens = maybe(rng, |r| r.gen_range(0..100_000));
    body.completion_tokens = maybe(rng, |r| r.gen());
    body.confidence = maybe(rng, |r| r.gen_range(0..=1000) as f64 / 1000.0);
    body
}

pub fn contextual_body(rng: &mut StdRng) -> ContextualBody {
    let op = *ContextualOp::ALL.choose(rng).unwrap();
    let source = match op {
        ContextualOp::Http => format!("https://host{}.example.com/p?q={}", rng.gen_range(0..9), rng.gen_range(0..99)),
        ContextualOp::Sql => "postgres://db.internal:5432/app".to_string(),
        ContextualOp::File => format!("/var/data/{}.csv", rng.gen_range(0..99)),
        _ => non_empty_text(rng, 20),
    };
    let mut body = ContextualBody::new(op, source);
    body.query_summary = maybe(rng, |r| text(r, 100));
    body.response_summary = maybe(rng, |r| text(r, 100));
    body.status_code = maybe(rng, |r| r.gen_range(-1..600));
    body.row_count = maybe(rng, |r| r.gen_range(0..1_000_000));
    body.provenance = maybe(rng, |r| text(r, 20));
    body
}

pub fn random_event(rng: &mut StdRng) -> LogEvent {
    let body = match rng.gen_range(0..3) {
        0 => SurfaceBody::Operational(operational_body(rng)),
        1 => SurfaceBody::Cognitive(cognitive_body(rng)),
        _ => SurfaceBody::Contextual(contextual_body(rng)),
    };
    let span_id = SpanId::random(rng);
    let parent_span_id = maybe(rng, SpanId::random).filter(|p| *p != span_id);
    LogEvent {
        event_id: EventId::new_v4(rng),
        surface: body.surface(),
        trace_id: TraceId::random(rng),
        span_id,
        parent_span_id,
        timestamp: timestamp(rng),
        agent: non_empty_text(rng, 16),
        level: *Level::ALL.choose(rng).unwrap(),
        body,
    }
}

// ---------------------------------------------------------------------------
// Single-field mutations for validation soundness/completeness.

/// What a mutation broke: the field path and a rule label comparable with
/// `Rule`'s discriminant (via `rule_label`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expected {
    pub field: String,
    pub rule: &'static str,
}

pub fn rule_label(rule: &agenttrace_core::Rule) -> &'static str {
    use agenttrace_core::Rule::*;
    match rule {
        NotAnObject => "not_an_object",
        Missing => "missing",
        Null => "null",
        WrongType(_) => "wrong_type",
        UnknownValue => "unknown_value",
        BadId(_) => "bad_id",
        BadTimestamp => "bad_timestamp",
        Empty => "empty",
        TooLong { .. } => "too_long",
        Negative => "negative",
        NotFinite => "not_finite",
        OutOfUnitRange => "out_of_unit_range",
        SurfaceBodyMismatch => "surface_body_mismatch",
        ParentIsSelf => "parent_is_self",
        DurationOnStart => "duration_on_start",
        DurationMissing => "duration_missing",
        ErrorReprMissing => "error_repr_missing",
        ErrorReprWithoutError => "error_repr_without_error",
        NoExtractedContent => "no_extracted_content",
        NotAUrl => "not_a_url",
    }
}

fn exp(field: &str, rule: &'static str) -> Expected {
    Expected {
        field: field.to_string(),
        rule,
    }
}

/// Applies one invariant-breaking mutation to `record` (the JSON form of
/// `event`) and returns what validation must report.
pub fn mutate(rng: &mut StdRng, event: &LogEvent, record: &mut Value) -> Expected {
    let obj = record.as_object_mut().unwrap();
    let mut options: Vec<u16> = (0..16).collect();
    match &event.body {
        SurfaceBody::Operational(_) => options.extend(100..110),
        SurfaceBody::Cognitive(_) => options.extend(200..205),
        SurfaceBody::Contextual(_) => options.extend(300..305),
    }
    let choice = *options.choose(rng).unwrap();
    let other_surface = *Surface::ALL
        .iter()
        .filter(|s| **s != event.surface)
        .collect::<Vec<_>>()
        .choose(rng)
        .unwrap();
    let Some(Value::Object(mut body)) = obj.remove("body") else {
        unreachable!("encoded events always carry a body object")
    };
    let b = &mut body;
    let outcome = match choice {
        0 => {
            obj.insert("event_id".into(), json!("not-a-uuid"));
            exp("event_id", "bad_id")
        }
        1 => {
            obj.insert("surface".into(), json!("kinetic"));
            exp("surface", "unknown_value")
        }
        2 => {
            obj.insert("surface".into(), json!(other_surface.as_str()));
            exp("surface", "surface_body_mismatch")
        }
        3 => {
            obj.insert("trace_id".into(), json!(event.trace_id.to_string().to_uppercase().replace(|c: char| c.is_ascii_digit(), "A")));
            exp("trace_id", "bad_id")
        }
        4 => {
            obj.insert("trace_id".into(), json!("0".repeat(32)));
            exp("trace_id", "bad_id")
        }
        5 => {
            obj.insert("span_id".into(), json!(&event.span_id.to_string()[..15]));
            exp("span_id", "bad_id")
        }
        6 => {
            obj.insert("parent_span_id".into(), json!(event.span_id.to_string()));
            exp("parent_span_id", "parent_is_self")
        }
        7 => {
            obj.insert("timestamp".into(), json!("2024-13-01T00:00:00.000000Z"));
            exp("timestamp", "bad_timestamp")
        }
        8 => {
            obj.insert("agent".into(), json!(""));
            exp("agent", "empty")
        }
        9 => {
            obj.insert("level".into(), json!("fatal"));
            exp("level", "unknown_value")
        }
        10 => exp("body", "missing"),
        11 => {
            b.insert("type".into(), json!("telepathic"));
            exp("body.type", "unknown_value")
        }
        12 => {
            obj.insert("agent".into(), Value::Null);
            exp("agent", "null")
        }
        13 => {
            obj.remove("timestamp");
            exp("timestamp", "missing")
        }
        14 => {
            obj.insert("level".into(), json!(3));
            exp("level", "wrong_type")
        }
        15 => {
            obj.insert("timestamp".into(), json!("2024-01-01T00:00:00Z"));
            exp("timestamp", "bad_timestamp")
        }
        100..=109 => {
            let status = b["status"].as_str().unwrap().to_string();
            match (choice, status.as_str()) {
                (100, "start") => {
                    b.insert("duration_ms".into(), json!(1.5));
                    exp("body.duration_ms", "duration_on_start")
                }
                (100, _) => {
                    b.remove("duration_ms");
                    exp("body.duration_ms", "duration_missing")
                }
                (101, "error") => {
                    b.remove("error_repr");
                    exp("body.error_repr", "error_repr_missing")
                }
                (101, _) => {
                    b.insert("error_repr".into(), json!("E"));
                    exp("body.error_repr", "error_repr_without_error")
                }
                (102, "start") | (103, "start") => {
                    b.insert("status".into(), json!("done"));
                    exp("body.status", "unknown_value")
                }
                (102, _) => {
                    b.insert("duration_ms".into(), json!(-0.5));
                    exp("body.duration_ms", "negative")
                }
                (103, _) => {
                    b.insert("duration_ms".into(), json!("12"));
                    exp("body.duration_ms", "wrong_type")
                }
                (104, _) => {
                    b.insert("method".into(), json!(""));
                    exp("body.method", "empty")
                }
                (105, _) => {
                    b.insert("args_summary".into(), json!("a".repeat(513)));
                    exp("body.args_summary", "too_long")
                }
                (106, _) => {
                    b.insert("result_summary".into(), json!("é".repeat(600)));
                    exp("body.result_summary", "too_long")
                }
                (107, _) => {
                    b.insert("arg_count".into(), json!(-1));
                    exp("body.arg_count", "negative")
                }
                (108, _) => {
                    b.insert("arg_count".into(), json!(2.5));
                    exp("body.arg_count", "wrong_type")
                }
                _ => {
                    b.remove("method");
                    exp("body.method", "missing")
                }
            }
        }
        200 => {
            b.insert("confidence".into(), json!(1.5));
            exp("body.confidence", "out_of_unit_range")
        }
        201 => {
            b.insert("extraction_strategy".into(), json!("magic"));
            exp("body.extraction_strategy", "unknown_value")
        }
        202 => {
            b.insert("prompt_tokens".into(), json!("12"));
            exp("body.prompt_tokens", "wrong_type")
        }
        203 => {
            b.remove("thought");
            b.remove("plan");
            b.remove("reflection");
            b.insert("extraction_strategy".into(), json!("xml_tag"));
            exp("body.extraction_strategy", "no_extracted_content")
        }
        204 => {
            b.insert("thought".into(), json!(["not", "text"]));
            exp("body.thought", "wrong_type")
        }
        300 => {
            b.insert("op_type".into(), json!("http"));
            b.insert("source".into(), json!("not a url"));
            exp("body.source", "not_a_url")
        }
        301 => {
            b.insert("op_type".into(), json!("ftp"));
            exp("body.op_type", "unknown_value")
        }
        302 => {
            b.insert("query_summary".into(), json!("q".repeat(1025)));
            exp("body.query_summary", "too_long")
        }
        303 => {
            b.insert("row_count".into(), json!(1.5));
            exp("body.row_count", "wrong_type")
        }
        _ => {
            b.insert("source".into(), json!(""));
            exp("body.source", "empty")
        }
    };
    if outcome != exp("body", "missing") {
        obj.insert("body".into(), Value::Object(body));
    }
    outcome
}

// ---------------------------------------------------------------------------
// Random span forests with recorded topology.

#[derive(Debug, Clone)]
pub struct TruthSpan {
    pub span_id: SpanId,
    pub parent: Option<SpanId>,
    pub name: String,
    pub start: Timestamp,
    pub end: Option<Timestamp>,
    pub duration_ms: Option<f64>,
    pub error: bool,
    pub start_event: EventId,
    pub terminal_event: Option<EventId>,
    pub attached: BTreeSet<EventId>,
}

#[derive(Debug, Clone)]
pub struct Forest {
    pub trace_id: TraceId,
    pub events: Vec<LogEvent>,
    pub spans: BTreeMap<SpanId, TruthSpan>,
    /// Spans whose parent id was drawn from outside the forest.
    pub dangling: BTreeSet<SpanId>,
    pub unanchored: BTreeSet<EventId>,
    /// (kind label, event id) of every injected anomaly.
    pub anomalies: BTreeSet<(&'static str, EventId)>,
}

#[derive(Debug, Clone, Copy)]
pub struct ForestShape {
    pub spans: usize,
    pub orphan_rate: f64,
    pub open_rate: f64,
    pub error_rate: f64,
    pub max_attached: usize,
    pub unanchored: usize,
    pub missing_starts: usize,
    pub duplicate_terminals: usize,
}

impl ForestShape {
    pub fn clean(spans: usize) -> Self {
        Self {
            spans,
            orphan_rate: 0.0,
            open_rate: 0.0,
            error_rate: 0.1,
            max_attached: 2,
            unanchored: 0,
            missing_starts: 0,
            duplicate_terminals: 0,
        }
    }
}

fn fresh_span(rng: &mut StdRng, used: &mut BTreeSet<SpanId>) -> SpanId {
    loop {
        let id = SpanId::random(rng);
        if used.insert(id) {
            return id;
        }
    }
}

fn envelope(rng: &mut StdRng, trace: TraceId, span: SpanId, parent: Option<SpanId>, ts: Timestamp, body: SurfaceBody) -> LogEvent {
    LogEvent {
        event_id: EventId::new_v4(rng),
        surface: body.surface(),
        trace_id: trace,
        span_id: span,
        parent_span_id: parent,
        timestamp: ts,
        agent: "forest-agent".into(),
        level: Level::Info,
        body,
    }
}

fn side_event(rng: &mut StdRng, trace: TraceId, span: SpanId, ts: Timestamp) -> LogEvent {
    let body = if rng.gen_bool(0.5) {
        SurfaceBody::Cognitive(CognitiveBody {
            thought: Some(format!("thought {}", rng.gen::<u16>())),
            ..CognitiveBody::empty(ExtractionStrategy::XmlTag)
        })
    } else {
        SurfaceBody::Contextual(ContextualBody::new(ContextualOp::Http, "https://api.example.com/v1"))
    };
    envelope(rng, trace, span, None, ts, body)
}

pub fn random_forest(rng: &mut StdRng, shape: ForestShape) -> Forest {
    let trace_id = TraceId::random(rng);
    let base = 1_700_000_000_000_000i64;
    let mut used = BTreeSet::new();
    let mut order: Vec<SpanId> = Vec::new();
    let mut spans = BTreeMap::new();
    let mut dangling = BTreeSet::new();
    let mut events = Vec::new();

    for i in 0..shape.spans {
        let span_id = fresh_span(rng, &mut used);
        let parent = if rng.gen_bool(shape.orphan_rate) {
            let p = fresh_span(rng, &mut used);
            dangling.insert(span_id);
            Some(p)
        } else if i > 0 && rng.gen_bool(0.8) {
            Some(*order.choose(rng).unwrap())
        } else {
            None
        };
        let start_us = match parent.and_then(|p| spans.get(&p)) {
            Some(TruthSpan { start, .. }) => start.as_unix_micros() + rng.gen_range(0..5_000),
            None => base + rng.gen_range(0..1_000_000),
        };
        let start = Timestamp::from_unix_micros(start_us).unwrap();
        let name = format!("method_{}", rng.gen_range(0..20));
        let start_ev = envelope(rng, trace_id, span_id, parent, start, SurfaceBody::Operational(OperationalBody::start(name.clone())));

        let open = rng.gen_bool(shape.open_rate);
        let error = !open && rng.gen_bool(shape.error_rate);
        let dur_us = rng.gen_range(0..50_000i64);
        let (end, duration_ms, terminal_event) = if open {
            (None, None, None)
        } else {
            let end = Timestamp::from_unix_micros(start_us + dur_us).unwrap();
            let d = dur_us as f64 / 1000.0;
            let body = if error {
                OperationalBody::error(name.clone(), d, "RuntimeError('boom')")
            } else {
                OperationalBody::complete(name.clone(), d)
            };
            let ev = envelope(rng, trace_id, span_id, parent, end, SurfaceBody::Operational(body));
            let id = ev.event_id;
            events.push(ev);
            (Some(end), Some(d), Some(id))
        };

        let mut attached = BTreeSet::new();
        for _ in 0..rng.gen_range(0..=shape.max_attached) {
            let offset = if open { rng.gen_range(0..100_000) } else { rng.gen_range(0..=dur_us) };
            let ts = Timestamp::from_unix_micros(start_us + offset).unwrap();
            let ev = side_event(rng, trace_id, span_id, ts);
            attached.insert(ev.event_id);
            events.push(ev);
        }

        spans.insert(
            span_id,
            TruthSpan {
                span_id,
                parent,
                name,
                start,
                end,
                duration_ms,
                error,
                start_event: start_ev.event_id,
                terminal_event,
                attached,
            },
        );
        events.push(start_ev);
        order.push(span_id);
    }

    let mut unanchored = BTreeSet::new();
    for _ in 0..shape.unanchored {
        let span = fresh_span(rng, &mut used);
        let ts = Timestamp::from_unix_micros(base + rng.gen_range(0..1_000_000)).unwrap();
        let ev = side_event(rng, trace_id, span, ts);
        unanchored.insert(ev.event_id);
        events.push(ev);
    }

    let mut anomalies = BTreeSet::new();
    for _ in 0..shape.missing_starts {
        let span = fresh_span(rng, &mut used);
        let ts = Timestamp::from_unix_micros(base + rng.gen_range(0..1_000_000)).unwrap();
        let ev = envelope(
            rng,
            trace_id,
            span,
            None,
            ts,
            SurfaceBody::Operational(OperationalBody::complete("ghost", 1.0)),
        );
        anomalies.insert(("missing_start", ev.event_id));
        events.push(ev);
    }
    let closed: Vec<SpanId> = spans.values().filter(|s| s.end.is_some()).map(|s| s.span_id).collect();
    for span_id in closed.choose_multiple(rng, shape.duplicate_terminals).copied().collect::<Vec<_>>() {
        let s = &spans[&span_id];
        let late = s.end.unwrap().offset_micros(1 + rng.gen_range(0..1000));
        let ev = envelope(
            rng,
            trace_id,
            span_id,
            s.parent,
            late,
            SurfaceBody::Operational(OperationalBody::complete(s.name.clone(), 99.0)),
        );
        anomalies.insert(("duplicate_terminal", ev.event_id));
        events.push(ev);
    }

    events.shuffle(rng);
    Forest {
        trace_id,
        events,
        spans,
        dangling,
        unanchored,
        anomalies,
    }
}

/// Naive statistics straight from the forest's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveStats {
    pub span_count: u64,
    pub depth: u64,
    pub total_ms: f64,
    pub critical_ms: f64,
    pub errors: u64,
    pub open: u64,
    pub operational: u64,
    pub cognitive: u64,
    pub contextual: u64,
}

impl Forest {
    fn ancestors(&self, id: SpanId) -> Vec<SpanId> {
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.spans[&cur].parent.filter(|p| self.spans.contains_key(p)) {
            chain.push(p);
            cur = p;
        }
        chain
    }

    pub fn naive_stats(&self) -> NaiveStats {
        let has_child: BTreeSet<SpanId> = self
            .spans
            .values()
            .filter_map(|s| s.parent.filter(|p| self.spans.contains_key(p)))
            .collect();
        let mut depth = 0;
        let mut critical: f64 = 0.0;
        for id in self.spans.keys() {
            let chain = self.ancestors(*id);
            depth = depth.max(chain.len() as u64 - 1);
            if !has_child.contains(id) {
                let sum: f64 = chain.iter().map(|s| self.spans[s].duration_ms.unwrap_or(0.0)).sum();
                critical = critical.max(sum);
            }
        }
        let anomalous: BTreeSet<EventId> = self.anomalies.iter().map(|(_, e)| *e).collect();
        let count = |s: Surface| {
            self.events
                .iter()
                .filter(|e| e.surface == s && !anomalous.contains(&e.event_id))
                .count() as u64
        };
        NaiveStats {
            span_count: self.spans.len() as u64,
            depth,
            total_ms: self.spans.values().map(|s| s.duration_ms.unwrap_or(0.0)).sum(),
            critical_ms: critical,
            errors: self.spans.values().filter(|s| s.error).count() as u64,
            open: self.spans.values().filter(|s| s.end.is_none()).count() as u64,
            operational: count(Surface::Operational),
            cognitive: count(Surface::Cognitive),
            contextual: count(Surface::Contextual),
        }
    }

    /// Expected `(start, span_id)`-ordered children of every span.
    pub fn children(&self) -> BTreeMap<SpanId, Vec<SpanId>> {
        let mut out: BTreeMap<SpanId, Vec<(Timestamp, SpanId)>> = BTreeMap::new();
        for s in self.spans.values() {
            if let Some(p) = s.parent.filter(|p| self.spans.contains_key(p)) {
                out.entry(p).or_default().push((s.start, s.span_id));
            }
        }
        out.into_iter()
            .map(|(k, mut v)| {
                v.sort();
                (k, v.into_iter().map(|(_, id)| id).collect())
            })
            .collect()
    }

    pub fn roots(&self) -> BTreeSet<SpanId> {
        self.spans.values().filter(|s| s.parent.is_none()).map(|s| s.span_id).collect()
    }
}

/// Compares an assembly against the forest's recorded topology.
pub fn check_assembly(forest: &Forest, a: &Assembly) {
    let tree = &a.tree;
    assert_eq!(tree.trace_id, Some(forest.trace_id));
    let roots: BTreeSet<SpanId> = tree.roots.iter().map(|s| s.span_id).collect();
    assert_eq!(roots, forest.roots());
    let orphans: BTreeSet<SpanId> = tree.orphans.iter().map(|s| s.span_id).collect();
    assert_eq!(orphans, forest.dangling);

    let children: BTreeMap<SpanId, Vec<SpanId>> = tree
        .children
        .iter()
        .map(|(k, v)| (*k, v.iter().map(|s| s.span_id).collect()))
        .collect();
    assert_eq!(children, forest.children());

    let walked = tree.walk();
    assert_eq!(walked.len(), forest.spans.len());
    for (_, parent, span) in walked {
        let truth = &forest.spans[&span.span_id];
        assert_eq!(parent.map(|p| p.span_id), truth.parent.filter(|p| forest.spans.contains_key(p)));
        assert_eq!(span.parent_span_id, truth.parent);
        assert_eq!(span.name, truth.name);
        assert_eq!(span.start_ts, truth.start);
        assert_eq!(span.end_ts, truth.end);
        assert_eq!(span.duration_ms, truth.duration_ms);
        assert_eq!(span.start_event, truth.start_event);
        assert_eq!(span.terminal_event, truth.terminal_event);
        let expected = match (truth.end, truth.error) {
            (None, _) => Outcome::Open,
            (Some(_), true) => Outcome::Error,
            (Some(_), false) => Outcome::Complete,
        };
        assert_eq!(span.outcome, expected);
        let attached: BTreeSet<EventId> = span.attached_events.iter().map(|e| e.event_id).collect();
        assert_eq!(attached, truth.attached);
    }

    let unanchored: BTreeSet<EventId> = tree.unanchored.iter().map(|e| e.event_id).collect();
    assert_eq!(unanchored, forest.unanchored);
    let anomalies: BTreeSet<(&str, EventId)> = a.anomalies.iter().map(|x| (x.kind.as_str(), x.event_id)).collect();
    assert_eq!(anomalies, forest.anomalies);
    assert_eq!(a.accounted(), forest.events.len());
}

/// Compares summary statistics against the brute-force values.
pub fn check_stats(forest: &Forest, stats: &StatsSummary) {
    let naive = forest.naive_stats();
    assert_eq!(stats.span_count, naive.span_count);
    assert_eq!(stats.depth, naive.depth);
    assert!((stats.total_duration_ms - naive.total_ms).abs() < 1e-6);
    assert!((stats.critical_path_ms - naive.critical_ms).abs() < 1e-6);
    assert_eq!(stats.error_count, naive.errors);
    assert_eq!(stats.open_count, naive.open);
    assert_eq!(stats.orphan_count, forest.dangling.len() as u64);
    assert_eq!(stats.events.operational, naive.operational);
    assert_eq!(stats.events.cognitive, naive.cognitive);
    assert_eq!(stats.events.contextual, naive.contextual);
    assert_eq!(stats.unanchored_events, forest.unanchored.len() as u64);
}
