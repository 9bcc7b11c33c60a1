//! Conversion of events into backend spans, and the span-line encoding used
//! both for delivery and for the local fallback file.
//!
//! Span-line keys, in order: `trace_id, span_id, parent_span_id, name,
//! start_time_unix_nano, end_time_unix_nano, status, attributes`. Attribute
//! values are tagged objects (`stringValue`, `intValue`, `doubleValue`,
//! `boolValue`) so the scalar kind survives a round trip. Times are decimal
//! strings, since nanoseconds past 2262 do not fit in 64 bits.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde_json::Value;

use crate::assembly::{assemble, AnomalyKind, TreeError};
use crate::ids::{EventId, SpanId, TraceId};
use crate::json::{write_str, ObjectWriter};
use crate::schema::{url_host, LogEvent, OpStatus, SurfaceBody};

pub const ATTRIBUTE_PREFIX: &str = "agenttrace.";
pub const ATTRIBUTE_VALUE_MAX: usize = 4096;
/// Floor applied to spans that would otherwise have zero length.
pub const MIN_SPAN_NANOS: i128 = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

pub type Attributes = BTreeMap<String, AttrValue>;

fn capped(text: String) -> String {
    if text.chars().count() > ATTRIBUTE_VALUE_MAX {
        crate::schema::truncate_summary(&text, ATTRIBUTE_VALUE_MAX)
    } else {
        text
    }
}

/// Stores `value` under `key` as one of the four scalar kinds.
///
/// Scalars are stored as themselves, arrays and objects as their
/// deterministic JSON text, and anything else (null, integers outside the
/// i64 range) as text. Text is capped at [`ATTRIBUTE_VALUE_MAX`] characters.
/// Empty keys are ignored.
pub fn set_attribute_defensive(attrs: &mut Attributes, key: &str, value: &Value) {
    if key.is_empty() {
        return;
    }
    let stored = match value {
        Value::Bool(b) => AttrValue::Bool(*b),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                AttrValue::Int(i)
            } else if n.is_f64() {
                match n.as_f64() {
                    Some(f) if f.is_finite() => AttrValue::Float(f),
                    _ => AttrValue::Str(n.to_string()),
                }
            } else {
                AttrValue::Str(n.to_string())
            }
        }
        Value::String(s) => AttrValue::Str(capped(s.clone())),
        Value::Array(_) | Value::Object(_) => AttrValue::Str(capped(crate::json::to_string(value))),
        Value::Null => AttrValue::Str("null".to_string()),
    };
    attrs.insert(key.to_string(), stored);
}

/// Fallback for values with no JSON form: stores their `Display` text.
pub fn set_attribute_text(attrs: &mut Attributes, key: &str, value: &dyn fmt::Display) {
    if key.is_empty() {
        return;
    }
    attrs.insert(key.to_string(), AttrValue::Str(capped(format!("{value}"))));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpanStatus {
    Ok,
    Error,
    Unset,
}

impl SpanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SpanStatus::Ok => "ok",
            SpanStatus::Error => "error",
            SpanStatus::Unset => "unset",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(SpanStatus::Ok),
            "error" => Some(SpanStatus::Error),
            "unset" => Some(SpanStatus::Unset),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportSpan {
    pub trace_id: TraceId,
    pub span_id: SpanId,
    pub parent_span_id: Option<SpanId>,
    pub name: String,
    pub start_unix_nanos: i128,
    pub end_unix_nanos: i128,
    pub status: SpanStatus,
    pub attributes: Attributes,
}

fn put<V: Into<Value>>(attrs: &mut Attributes, key: &str, value: Option<V>) {
    if let Some(v) = value {
        set_attribute_defensive(attrs, &format!("{ATTRIBUTE_PREFIX}{key}"), &v.into());
    }
}

fn put_f64(attrs: &mut Attributes, key: &str, value: Option<f64>) {
    if let Some(v) = value.and_then(serde_json::Number::from_f64) {
        put(attrs, key, Some(Value::Number(v)));
    }
}

fn envelope_attributes(attrs: &mut Attributes, event: &LogEvent) {
    put(attrs, "event_id", Some(event.event_id.to_string()));
    put(attrs, "surface", Some(event.surface.as_str()));
    put(attrs, "agent", Some(event.agent.as_str()));
    put(attrs, "level", Some(event.level.as_str()));
}

fn body_attributes(attrs: &mut Attributes, body: &SurfaceBody) {
    match body {
        SurfaceBody::Operational(b) => {
            put(attrs, "method", Some(b.method.as_str()));
            put(attrs, "status", Some(b.status.as_str()));
            put_f64(attrs, "duration_ms", b.duration_ms);
            put(attrs, "arg_count", b.arg_count);
            put(attrs, "args_summary", b.args_summary.as_deref());
            put(attrs, "result_type", b.result_type.as_deref());
            put(attrs, "result_summary", b.result_summary.as_deref());
            put(attrs, "error_repr", b.error_repr.as_deref());
        }
        SurfaceBody::Cognitive(b) => {
            put(attrs, "thought", b.thought.as_deref());
            put(attrs, "plan", b.plan.as_deref());
            put(attrs, "reflection", b.reflection.as_deref());
            put(attrs, "model", b.model.as_deref());
            put(attrs, "prompt_tokens", b.prompt_tokens);
            put(attrs, "completion_tokens", b.completion_tokens);
            put_f64(attrs, "confidence", b.confidence);
            put(attrs, "extraction_strategy", Some(b.extraction_strategy.as_str()));
        }
        SurfaceBody::Contextual(b) => {
            put(attrs, "op_type", Some(b.op_type.as_str()));
            put(attrs, "source", Some(b.source.as_str()));
            put(attrs, "query_summary", b.query_summary.as_deref());
            put(attrs, "response_summary", b.response_summary.as_deref());
            put(attrs, "status_code", b.status_code);
            put(attrs, "row_count", b.row_count);
            put(attrs, "provenance", b.provenance.as_deref());
        }
    }
}

fn duration_nanos(ms: Option<f64>) -> i128 {
    match ms {
        Some(ms) if ms.is_finite() && ms > 0.0 => (ms * 1_000_000.0 + 0.5) as i128,
        _ => 0,
    }
}

/// Span id used for a cognitive or contextual event: the first eight bytes of
/// its event id (never zero, since they hold the UUID version nibble).
pub fn derived_span_id(event_id: EventId) -> SpanId {
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&event_id.as_bytes()[..8]);
    SpanId::from_bytes(bytes).expect("uuid version nibble is non-zero")
}

fn contextual_target(source: &str) -> String {
    if let Some(host) = url_host(source) {
        return host.to_string();
    }
    match source.split_once(':') {
        Some((scheme, _))
            if !scheme.is_empty()
                && scheme.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.')) =>
        {
            scheme.to_string()
        }
        _ => "local".to_string(),
    }
}

/// Builds the backend span for one event.
///
/// An operational start plus its terminal becomes one span whose length is
/// the reported duration. A lone start is an `unset` span of minimal length;
/// a lone terminal is placed to end at its own timestamp. Cognitive and
/// contextual events become minimal-length child spans of the span they
/// carry, with an id derived from the event id.
pub fn event_to_span(event: &LogEvent, paired_terminal: Option<&LogEvent>) -> ExportSpan {
    let mut attributes = Attributes::new();
    envelope_attributes(&mut attributes, event);
    body_attributes(&mut attributes, &event.body);
    let ts = event.timestamp.as_unix_nanos();

    match &event.body {
        SurfaceBody::Operational(op) => {
            let terminal = paired_terminal.and_then(|t| t.operational().map(|b| (t, b)));
            let (start, end, status, name) = match (op.status, terminal) {
                (OpStatus::Start, Some((t, tb))) => {
                    body_attributes(&mut attributes, &t.body);
                    put(&mut attributes, "terminal_event_id", Some(t.event_id.to_string()));
                    let status = if tb.status == OpStatus::Error {
                        SpanStatus::Error
                    } else {
                        SpanStatus::Ok
                    };
                    (ts, ts + duration_nanos(tb.duration_ms), status, op.method.clone())
                }
                (OpStatus::Start, None) => (ts, ts + MIN_SPAN_NANOS, SpanStatus::Unset, op.method.clone()),
                (status, _) => {
                    let span_status = if status == OpStatus::Error {
                        SpanStatus::Error
                    } else {
                        SpanStatus::Ok
                    };
                    (ts - duration_nanos(op.duration_ms), ts, span_status, op.method.clone())
                }
            };
            ExportSpan {
                trace_id: event.trace_id,
                span_id: event.span_id,
                parent_span_id: event.parent_span_id,
                name,
                start_unix_nanos: start,
                end_unix_nanos: end.max(start),
                status,
                attributes,
            }
        }
        SurfaceBody::Cognitive(b) => ExportSpan {
            trace_id: event.trace_id,
            span_id: derived_span_id(event.event_id),
            parent_span_id: Some(event.span_id),
            name: format!("cognitive.{}", b.extraction_strategy.as_str()),
            start_unix_nanos: ts,
            end_unix_nanos: ts + MIN_SPAN_NANOS,
            status: SpanStatus::Unset,
            attributes,
        },
        SurfaceBody::Contextual(b) => ExportSpan {
            trace_id: event.trace_id,
            span_id: derived_span_id(event.event_id),
            parent_span_id: Some(event.span_id),
            name: format!("{}.{}", b.op_type.as_str(), contextual_target(&b.source)),
            start_unix_nanos: ts,
            end_unix_nanos: ts + MIN_SPAN_NANOS,
            status: SpanStatus::Unset,
            attributes,
        },
    }
}

/// Exports a whole trace: one span per assembled operational span, one per
/// attached or unanchored event, and one per terminal event that had no
/// start. Attached events are parented under the span they were attached to.
/// Duplicate starts, terminals, and events are not exported.
pub fn trace_to_spans(events: &[LogEvent]) -> Result<Vec<ExportSpan>, TreeError> {
    let by_id: BTreeMap<EventId, &LogEvent> = events.iter().map(|e| (e.event_id, e)).collect();
    let assembly = assemble(events)?;
    let mut out = Vec::new();
    for (_, _, span) in assembly.tree.walk() {
        let start = by_id[&span.start_event];
        let terminal = span.terminal_event.map(|id| by_id[&id]);
        out.push(event_to_span(start, terminal));
        for attached in &span.attached_events {
            let mut s = event_to_span(by_id[&attached.event_id], None);
            s.parent_span_id = Some(span.span_id);
            out.push(s);
        }
    }
    for ev in &assembly.tree.unanchored {
        out.push(event_to_span(by_id[&ev.event_id], None));
    }
    for a in &assembly.anomalies {
        if a.kind == AnomalyKind::MissingStart {
            out.push(event_to_span(by_id[&a.event_id], None));
        }
    }
    Ok(out)
}

fn write_attr(out: &mut String, v: &AttrValue) {
    let mut w = ObjectWriter::new(out);
    match v {
        AttrValue::Str(s) => w.str("stringValue", s),
        AttrValue::Int(i) => w.int("intValue", i),
        AttrValue::Float(f) => w.float("doubleValue", *f),
        AttrValue::Bool(b) => w.bool("boolValue", *b),
    };
    w.finish();
}

impl ExportSpan {
    /// One LF-terminated span line.
    pub fn encode_line(&self) -> String {
        let mut out = String::with_capacity(256);
        let mut w = ObjectWriter::new(&mut out);
        w.display("trace_id", self.trace_id)
            .display("span_id", self.span_id);
        if let Some(p) = self.parent_span_id {
            w.display("parent_span_id", p);
        }
        w.str("name", &self.name)
            .display("start_time_unix_nano", self.start_unix_nanos)
            .display("end_time_unix_nano", self.end_unix_nanos)
            .str("status", self.status.as_str())
            .raw("attributes", |out| {
                out.push('{');
                for (i, (k, v)) in self.attributes.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_str(out, k);
                    out.push(':');
                    write_attr(out, v);
                }
                out.push('}');
            });
        w.finish();
        out.push('\n');
        out
    }

    pub fn decode_line(line: &str) -> Result<ExportSpan, SpanLineError> {
        let v: Value = serde_json::from_str(line.trim_end_matches(['\n', '\r']))
            .map_err(|e| SpanLineError(e.to_string()))?;
        let err = |what: &str| SpanLineError(format!("bad or missing {what}"));
        let s = |key: &str| v.get(key).and_then(Value::as_str).ok_or_else(|| err(key));
        let nanos = |key: &str| {
            v.get(key)
                .and_then(|n| match n {
                    Value::String(t) => t.parse::<i128>().ok(),
                    _ => n.as_i64().map(i128::from).or_else(|| n.as_u64().map(i128::from)),
                })
                .ok_or_else(|| err(key))
        };
        let parent = match v.get("parent_span_id") {
            None => None,
            Some(p) => Some(
                p.as_str()
                    .and_then(|p| SpanId::parse(p).ok())
                    .ok_or_else(|| err("parent_span_id"))?,
            ),
        };
        let mut attributes = Attributes::new();
        for (k, tagged) in v
            .get("attributes")
            .and_then(Value::as_object)
            .ok_or_else(|| err("attributes"))?
        {
            let val = if let Some(s) = tagged.get("stringValue").and_then(Value::as_str) {
                AttrValue::Str(s.to_string())
            } else if let Some(i) = tagged.get("intValue").and_then(Value::as_i64) {
                AttrValue::Int(i)
            } else if let Some(f) = tagged.get("doubleValue").and_then(Value::as_f64) {
                AttrValue::Float(f)
            } else if let Some(b) = tagged.get("boolValue").and_then(Value::as_bool) {
                AttrValue::Bool(b)
            } else {
                return Err(err(k));
            };
            attributes.insert(k.clone(), val);
        }
        Ok(ExportSpan {
            trace_id: TraceId::parse(s("trace_id")?).map_err(|_| err("trace_id"))?,
            span_id: SpanId::parse(s("span_id")?).map_err(|_| err("span_id"))?,
            parent_span_id: parent,
            name: s("name")?.to_string(),
            start_unix_nanos: nanos("start_time_unix_nano")?,
            end_unix_nanos: nanos("end_time_unix_nano")?,
            status: SpanStatus::parse(s("status")?).ok_or_else(|| err("status"))?,
            attributes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanLineError(pub String);

impl fmt::Display for SpanLineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid span line: {}", self.0)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpanLineError {}
