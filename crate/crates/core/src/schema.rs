//! The event envelope, per-surface payloads, validation, and line encoding.
//!
//! A line is one JSON object terminated by `\n`. Envelope keys are written in
//! the fixed order `event_id, surface, trace_id, span_id, parent_span_id,
//! timestamp, agent, level, body`; the body starts with its `type` tag
//! followed by the payload fields in declaration order. Absent optional
//! fields are omitted and `null` never appears.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde_json::{Map, Value};

use crate::ids::{EventId, IdError, SpanId, TraceId};
use crate::json::ObjectWriter;
use crate::time::Timestamp;

pub const ARGS_SUMMARY_MAX: usize = 512;
pub const RESULT_SUMMARY_MAX: usize = 512;
pub const QUERY_SUMMARY_MAX: usize = 1024;
pub const RESPONSE_SUMMARY_MAX: usize = 1024;

macro_rules! text_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

text_enum!(
    /// Observability plane an event belongs to.
    Surface {
        Operational => "operational",
        Cognitive => "cognitive",
        Contextual => "contextual",
    }
);

text_enum!(Level {
    Debug => "debug",
    Info => "info",
    Warn => "warn",
    Error => "error",
});

text_enum!(OpStatus {
    Start => "start",
    Complete => "complete",
    Error => "error",
});

text_enum!(
    /// Which extraction strategy produced a cognitive payload.
    ExtractionStrategy {
        XmlTag => "xml_tag",
        JsonField => "json_field",
        Marker => "marker",
        None => "none",
    }
);

text_enum!(ContextualOp {
    Http => "http",
    Sql => "sql",
    Nosql => "nosql",
    Cache => "cache",
    VectorDb => "vector_db",
    File => "file",
});

#[derive(Debug, Clone, PartialEq)]
pub struct OperationalBody {
    pub method: String,
    pub status: OpStatus,
    pub duration_ms: Option<f64>,
    pub arg_count: Option<u64>,
    pub args_summary: Option<String>,
    pub result_type: Option<String>,
    pub result_summary: Option<String>,
    pub error_repr: Option<String>,
}

impl OperationalBody {
    pub fn start(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            status: OpStatus::Start,
            duration_ms: None,
            arg_count: None,
            args_summary: None,
            result_type: None,
            result_summary: None,
            error_repr: None,
        }
    }

    pub fn complete(method: impl Into<String>, duration_ms: f64) -> Self {
        Self {
            status: OpStatus::Complete,
            duration_ms: Some(duration_ms),
            ..Self::start(method)
        }
    }

    pub fn error(method: impl Into<String>, duration_ms: f64, error_repr: impl Into<String>) -> Self {
        Self {
            status: OpStatus::Error,
            duration_ms: Some(duration_ms),
            error_repr: Some(error_repr.into()),
            ..Self::start(method)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CognitiveBody {
    pub thought: Option<String>,
    pub plan: Option<String>,
    pub reflection: Option<String>,
    pub model: Option<String>,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    /// Carried through from the emitter; never computed here.
    pub confidence: Option<f64>,
    pub extraction_strategy: ExtractionStrategy,
}

impl CognitiveBody {
    pub fn empty(strategy: ExtractionStrategy) -> Self {
        Self {
            thought: None,
            plan: None,
            reflection: None,
            model: None,
            prompt_tokens: None,
            completion_tokens: None,
            confidence: None,
            extraction_strategy: strategy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualBody {
    pub op_type: ContextualOp,
    /// URL, DSN, or filesystem path.
    pub source: String,
    pub query_summary: Option<String>,
    pub response_summary: Option<String>,
    pub status_code: Option<i64>,
    pub row_count: Option<u64>,
    pub provenance: Option<String>,
}

impl ContextualBody {
    pub fn new(op_type: ContextualOp, source: impl Into<String>) -> Self {
        Self {
            op_type,
            source: source.into(),
            query_summary: None,
            response_summary: None,
            status_code: None,
            row_count: None,
            provenance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceBody {
    Operational(OperationalBody),
    Cognitive(CognitiveBody),
    Contextual(ContextualBody),
}

impl SurfaceBody {
    pub fn surface(&self) -> Surface {
        match self {
            SurfaceBody::Operational(_) => Surface::Operational,
            SurfaceBody::Cognitive(_) => Surface::Cognitive,
            SurfaceBody::Contextual(_) => Surface::Contextual,
        }
    }
}

/// One emitted record; identical shape for all three surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent {
    pub event_id: EventId,
    pub surface: Surface,
    pub trace_id: TraceId,
    pub span_id: SpanId,
    pub parent_span_id: Option<SpanId>,
    pub timestamp: Timestamp,
    pub agent: String,
    pub level: Level,
    pub body: SurfaceBody,
}

impl LogEvent {
    pub fn operational(&self) -> Option<&OperationalBody> {
        match &self.body {
            SurfaceBody::Operational(b) => Some(b),
            _ => None,
        }
    }

    /// Every schema violation this event would produce on the wire.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let text = self.write_unchecked(&mut out);
        if !out.is_empty() {
            return out;
        }
        match serde_json::from_str::<Value>(&text) {
            Ok(v) => check(&v).1,
            // Unreachable for text produced by write_unchecked.
            Err(_) => alloc::vec![Violation::new("", Rule::NotAnObject)],
        }
    }

    /// Writes the line without the trailing LF; non-finite floats are reported
    /// into `bad` because they have no JSON form.
    fn write_unchecked(&self, bad: &mut Vec<Violation>) -> String {
        let mut out = String::with_capacity(256);
        let mut w = ObjectWriter::new(&mut out);
        w.display("event_id", self.event_id)
            .str("surface", self.surface.as_str())
            .display("trace_id", self.trace_id)
            .display("span_id", self.span_id);
        if let Some(parent) = self.parent_span_id {
            w.display("parent_span_id", parent);
        }
        w.display("timestamp", self.timestamp)
            .str("agent", &self.agent)
            .str("level", self.level.as_str())
            .raw("body", |out| write_body(out, &self.body, bad));
        w.finish();
        out
    }
}

fn finite_or_report(v: Option<f64>, field: &'static str, bad: &mut Vec<Violation>) -> Option<f64> {
    match v {
        Some(x) if !x.is_finite() => {
            bad.push(Violation::new(field, Rule::NotFinite));
            None
        }
        other => other,
    }
}

fn write_body(out: &mut String, body: &SurfaceBody, bad: &mut Vec<Violation>) {
    let mut w = ObjectWriter::new(out);
    w.str("type", body.surface().as_str());
    match body {
        SurfaceBody::Operational(b) => {
            let duration = finite_or_report(b.duration_ms, "body.duration_ms", bad);
            w.str("method", &b.method)
                .str("status", b.status.as_str())
                .opt_float("duration_ms", duration)
                .opt_int("arg_count", b.arg_count)
                .opt_str("args_summary", b.args_summary.as_deref())
                .opt_str("result_type", b.result_type.as_deref())
                .opt_str("result_summary", b.result_summary.as_deref())
                .opt_str("error_repr", b.error_repr.as_deref());
        }
        SurfaceBody::Cognitive(b) => {
            let confidence = finite_or_report(b.confidence, "body.confidence", bad);
            w.opt_str("thought", b.thought.as_deref())
                .opt_str("plan", b.plan.as_deref())
                .opt_str("reflection", b.reflection.as_deref())
                .opt_str("model", b.model.as_deref())
                .opt_int("prompt_tokens", b.prompt_tokens)
                .opt_int("completion_tokens", b.completion_tokens)
                .opt_float("confidence", confidence)
                .str("extraction_strategy", b.extraction_strategy.as_str());
        }
        SurfaceBody::Contextual(b) => {
            w.str("op_type", b.op_type.as_str())
                .str("source", &b.source)
                .opt_str("query_summary", b.query_summary.as_deref())
                .opt_str("response_summary", b.response_summary.as_deref())
                .opt_int("status_code", b.status_code)
                .opt_int("row_count", b.row_count)
                .opt_str("provenance", b.provenance.as_deref());
        }
    }
    w.finish();
}

/// The specific rule a field broke.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    NotAnObject,
    Missing,
    Null,
    WrongType(&'static str),
    UnknownValue,
    BadId(IdError),
    BadTimestamp,
    Empty,
    TooLong { max: usize },
    Negative,
    NotFinite,
    OutOfUnitRange,
    SurfaceBodyMismatch,
    ParentIsSelf,
    DurationOnStart,
    DurationMissing,
    ErrorReprMissing,
    ErrorReprWithoutError,
    NoExtractedContent,
    NotAUrl,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::NotAnObject => f.write_str("record is not a JSON object"),
            Rule::Missing => f.write_str("required field missing"),
            Rule::Null => f.write_str("null is not allowed; omit the field"),
            Rule::WrongType(kind) => write!(f, "expected {kind}"),
            Rule::UnknownValue => f.write_str("unknown enumeration value"),
            Rule::BadId(e) => write!(f, "bad identifier: {e}"),
            Rule::BadTimestamp => f.write_str("expected YYYY-MM-DDTHH:MM:SS.ffffffZ"),
            Rule::Empty => f.write_str("must be non-empty"),
            Rule::TooLong { max } => write!(f, "longer than {max} characters"),
            Rule::Negative => f.write_str("must be non-negative"),
            Rule::NotFinite => f.write_str("must be finite"),
            Rule::OutOfUnitRange => f.write_str("must lie in [0, 1]"),
            Rule::SurfaceBodyMismatch => f.write_str("surface/body mismatch"),
            Rule::ParentIsSelf => f.write_str("parent_span_id equals span_id"),
            Rule::DurationOnStart => f.write_str("duration_ms present on a start event"),
            Rule::DurationMissing => f.write_str("duration_ms required on complete/error"),
            Rule::ErrorReprMissing => f.write_str("error_repr required when status=error"),
            Rule::ErrorReprWithoutError => f.write_str("error_repr only allowed when status=error"),
            Rule::NoExtractedContent => {
                f.write_str("strategy set but thought, plan, and reflection are all empty")
            }
            Rule::NotAUrl => f.write_str("http source must be a URL"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Dotted path of the offending field, e.g. `body.duration_ms`.
    pub field: String,
    pub rule: Rule,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: Rule) -> Self {
        Self {
            field: field.into(),
            rule,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.rule)
        } else {
            write!(f, "{}: {}", self.field, self.rule)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a structurally decoded record against every schema rule.
///
/// Total: never panics, and reports all violations rather than the first.
pub fn validate_event(candidate: &Value) -> Validation {
    Validation {
        violations: check(candidate).1,
    }
}

struct Fields<'a, 'v> {
    map: &'v Map<String, Value>,
    prefix: &'static str,
    out: &'a mut Vec<Violation>,
}

impl<'a, 'v> Fields<'a, 'v> {
    fn path(&self, key: &str) -> String {
        format!("{}{}", self.prefix, key)
    }

    fn flag(&mut self, key: &str, rule: Rule) {
        let field = self.path(key);
        self.out.push(Violation::new(field, rule));
    }

    fn present(&self, key: &str) -> bool {
        matches!(self.map.get(key), Some(v) if !v.is_null())
    }

    /// `Ok(None)` when absent; `Err(())` after recording a violation.
    fn raw(&mut self, key: &str, required: bool) -> Result<Option<&'v Value>, ()> {
        match self.map.get(key) {
            None if required => {
                self.flag(key, Rule::Missing);
                Err(())
            }
            None => Ok(None),
            Some(Value::Null) => {
                self.flag(key, Rule::Null);
                Err(())
            }
            Some(v) => Ok(Some(v)),
        }
    }

    fn string(&mut self, key: &str, required: bool) -> Result<Option<&'v str>, ()> {
        match self.raw(key, required)? {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => {
                self.flag(key, Rule::WrongType("string"));
                Err(())
            }
        }
    }

    fn bounded_string(&mut self, key: &str, max: usize) -> Result<Option<String>, ()> {
        let s = self.string(key, false)?;
        if let Some(s) = s {
            if s.chars().count() > max {
                self.flag(key, Rule::TooLong { max });
                return Err(());
            }
        }
        Ok(s.map(str::to_string))
    }

    fn non_empty(&mut self, key: &str) -> Result<String, ()> {
        match self.string(key, true)? {
            Some("") => {
                self.flag(key, Rule::Empty);
                Err(())
            }
            Some(s) => Ok(s.to_string()),
            None => Err(()),
        }
    }

    fn opt_text(&mut self, key: &str) -> Result<Option<String>, ()> {
        Ok(self.string(key, false)?.map(str::to_string))
    }

    fn enumerated<T>(&mut self, key: &str, parse: fn(&str) -> Option<T>) -> Result<T, ()> {
        let s = self.string(key, true)?.ok_or(())?;
        parse(s).ok_or_else(|| self.flag(key, Rule::UnknownValue))
    }

    fn unsigned(&mut self, key: &str) -> Result<Option<u64>, ()> {
        match self.raw(key, false)? {
            None => Ok(None),
            Some(Value::Number(n)) => {
                if let Some(u) = n.as_u64() {
                    Ok(Some(u))
                } else if n.as_i64().is_some_and(|i| i < 0) {
                    self.flag(key, Rule::Negative);
                    Err(())
                } else {
                    self.flag(key, Rule::WrongType("non-negative integer"));
                    Err(())
                }
            }
            Some(_) => {
                self.flag(key, Rule::WrongType("non-negative integer"));
                Err(())
            }
        }
    }

    fn signed(&mut self, key: &str) -> Result<Option<i64>, ()> {
        match self.raw(key, false)? {
            None => Ok(None),
            Some(Value::Number(n)) if n.as_i64().is_some() => Ok(n.as_i64()),
            Some(_) => {
                self.flag(key, Rule::WrongType("integer"));
                Err(())
            }
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>, ()> {
        match self.raw(key, false)? {
            None => Ok(None),
            Some(Value::Number(n)) => match n.as_f64() {
                Some(f) if f.is_finite() => Ok(Some(f)),
                _ => {
                    self.flag(key, Rule::NotFinite);
                    Err(())
                }
            },
            Some(_) => {
                self.flag(key, Rule::WrongType("number"));
                Err(())
            }
        }
    }

    fn id<T>(&mut self, key: &str, required: bool, parse: fn(&str) -> Result<T, IdError>) -> Result<Option<T>, ()> {
        match self.string(key, required)? {
            None => Ok(None),
            Some(s) => parse(s)
                .map(Some)
                .map_err(|e| self.flag(key, Rule::BadId(e))),
        }
    }
}

/// Host part of `scheme://authority/...`, or `None` when `s` is not a URL.
pub fn url_host(s: &str) -> Option<&str> {
    let (scheme, rest) = s.split_once("://")?;
    let mut chars = scheme.chars();
    let scheme_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    if !scheme_ok || s.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return None;
    }
    let authority = rest.split(['/', '?', '#']).next().unwrap_or("");
    let host_port = authority.rsplit('@').next().unwrap_or("");
    let host = if let Some(v6) = host_port.strip_prefix('[') {
        v6.split(']').next().unwrap_or("")
    } else {
        host_port.split(':').next().unwrap_or("")
    };
    (!host.is_empty()).then_some(host)
}

fn check_operational(f: &mut Fields<'_, '_>) -> Option<OperationalBody> {
    let method = f.non_empty("method");
    let status = f.enumerated("status", OpStatus::parse);
    let duration_present = f.present("duration_ms");
    let duration = f.float("duration_ms").and_then(|d| match d {
        Some(x) if x < 0.0 => {
            f.flag("duration_ms", Rule::Negative);
            Err(())
        }
        other => Ok(other),
    });
    let arg_count = f.unsigned("arg_count");
    let args_summary = f.bounded_string("args_summary", ARGS_SUMMARY_MAX);
    let result_type = f.opt_text("result_type");
    let result_summary = f.bounded_string("result_summary", RESULT_SUMMARY_MAX);
    let error_present = f.present("error_repr");
    let error_repr = f.opt_text("error_repr");

    if let Ok(status) = status {
        match (status, duration_present) {
            (OpStatus::Start, true) => f.flag("duration_ms", Rule::DurationOnStart),
            (OpStatus::Complete | OpStatus::Error, false) => {
                f.flag("duration_ms", Rule::DurationMissing)
            }
            _ => {}
        }
        match (status, error_present) {
            (OpStatus::Error, false) => f.flag("error_repr", Rule::ErrorReprMissing),
            (OpStatus::Start | OpStatus::Complete, true) => {
                f.flag("error_repr", Rule::ErrorReprWithoutError)
            }
            _ => {}
        }
    }

    Some(OperationalBody {
        method: method.ok()?,
        status: status.ok()?,
        duration_ms: duration.ok()?,
        arg_count: arg_count.ok()?,
        args_summary: args_summary.ok()?,
        result_type: result_type.ok()?,
        result_summary: result_summary.ok()?,
        error_repr: error_repr.ok()?,
    })
}

fn check_cognitive(f: &mut Fields<'_, '_>) -> Option<CognitiveBody> {
    let thought = f.opt_text("thought");
    let plan = f.opt_text("plan");
    let reflection = f.opt_text("reflection");
    let model = f.opt_text("model");
    let prompt_tokens = f.unsigned("prompt_tokens");
    let completion_tokens = f.unsigned("completion_tokens");
    let confidence = f.float("confidence").and_then(|c| match c {
        Some(x) if !(0.0..=1.0).contains(&x) => {
            f.flag("confidence", Rule::OutOfUnitRange);
            Err(())
        }
        other => Ok(other),
    });
    let strategy = f.enumerated("extraction_strategy", ExtractionStrategy::parse);

    if let (Ok(strategy), Ok(t), Ok(p), Ok(r)) = (&strategy, &thought, &plan, &reflection) {
        let has_content = [t, p, r]
            .iter()
            .any(|s| s.as_deref().is_some_and(|s| !s.is_empty()));
        if *strategy != ExtractionStrategy::None && !has_content {
            f.flag("extraction_strategy", Rule::NoExtractedContent);
        }
    }

    Some(CognitiveBody {
        thought: thought.ok()?,
        plan: plan.ok()?,
        reflection: reflection.ok()?,
        model: model.ok()?,
        prompt_tokens: prompt_tokens.ok()?,
        completion_tokens: completion_tokens.ok()?,
        confidence: confidence.ok()?,
        extraction_strategy: strategy.ok()?,
    })
}

fn check_contextual(f: &mut Fields<'_, '_>) -> Option<ContextualBody> {
    let op_type = f.enumerated("op_type", ContextualOp::parse);
    let source = f.non_empty("source");
    let query_summary = f.bounded_string("query_summary", QUERY_SUMMARY_MAX);
    let response_summary = f.bounded_string("response_summary", RESPONSE_SUMMARY_MAX);
    let status_code = f.signed("status_code");
    let row_count = f.unsigned("row_count");
    let provenance = f.opt_text("provenance");

    if let (Ok(ContextualOp::Http), Ok(source)) = (&op_type, &source) {
        if url_host(source).is_none() {
            f.flag("source", Rule::NotAUrl);
        }
    }

    Some(ContextualBody {
        op_type: op_type.ok()?,
        source: source.ok()?,
        query_summary: query_summary.ok()?,
        response_summary: response_summary.ok()?,
        status_code: status_code.ok()?,
        row_count: row_count.ok()?,
        provenance: provenance.ok()?,
    })
}

/// Validates and, when clean, builds the typed event.
fn check(candidate: &Value) -> (Option<LogEvent>, Vec<Violation>) {
    let mut out = Vec::new();
    let Value::Object(map) = candidate else {
        out.push(Violation::new("", Rule::NotAnObject));
        return (None, out);
    };
    let mut f = Fields {
        map,
        prefix: "",
        out: &mut out,
    };

    let event_id = f.id("event_id", true, EventId::parse);
    let surface = f.enumerated("surface", Surface::parse);
    let trace_id = f.id("trace_id", true, TraceId::parse);
    let span_id = f.id("span_id", true, SpanId::parse);
    let parent_span_id = f.id("parent_span_id", false, SpanId::parse);
    let timestamp = f
        .string("timestamp", true)
        .and_then(|s| s.ok_or(()))
        .and_then(|s| Timestamp::parse(s).map_err(|_| f.flag("timestamp", Rule::BadTimestamp)));
    let agent = f.non_empty("agent");
    let level = f.enumerated("level", Level::parse);

    if let (Ok(Some(span)), Ok(Some(parent))) = (&span_id, &parent_span_id) {
        if span == parent {
            f.flag("parent_span_id", Rule::ParentIsSelf);
        }
    }

    let body = match f.raw("body", true) {
        Ok(Some(Value::Object(body_map))) => {
            let mut bf = Fields {
                map: body_map,
                prefix: "body.",
                out: f.out,
            };
            match bf.enumerated("type", Surface::parse) {
                Ok(tag) => {
                    if let Ok(surface) = surface {
                        if surface != tag {
                            bf.out
                                .push(Violation::new("surface", Rule::SurfaceBodyMismatch));
                        }
                    }
                    match tag {
                        Surface::Operational => {
                            check_operational(&mut bf).map(SurfaceBody::Operational)
                        }
                        Surface::Cognitive => check_cognitive(&mut bf).map(SurfaceBody::Cognitive),
                        Surface::Contextual => {
                            check_contextual(&mut bf).map(SurfaceBody::Contextual)
                        }
                    }
                }
                Err(()) => None,
            }
        }
        Ok(_) => {
            f.flag("body", Rule::WrongType("object"));
            None
        }
        Err(()) => None,
    };

    if !out.is_empty() {
        return (None, out);
    }
    let event = (|| {
        Some(LogEvent {
            event_id: event_id.ok()??,
            surface: surface.ok()?,
            trace_id: trace_id.ok()??,
            span_id: span_id.ok()??,
            parent_span_id: parent_span_id.ok()?,
            timestamp: timestamp.ok()?,
            agent: agent.ok()?,
            level: level.ok()?,
            body: body?,
        })
    })();
    (event, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for EncodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("event fails schema validation")?;
        for v in &self.violations {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EncodeError {}

/// Encodes a valid event as one LF-terminated line.
pub fn encode_line(event: &LogEvent) -> Result<Vec<u8>, EncodeError> {
    let mut bad = Vec::new();
    let text = event.write_unchecked(&mut bad);
    if bad.is_empty() {
        match serde_json::from_str::<Value>(&text) {
            Ok(v) => bad = check(&v).1,
            Err(_) => bad.push(Violation::new("", Rule::NotAnObject)),
        }
    }
    if !bad.is_empty() {
        return Err(EncodeError { violations: bad });
    }
    let mut bytes = text.into_bytes();
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    /// Not a well-formed JSON text.
    Parse(String),
    /// Well-formed JSON that breaks the schema.
    Validation(Vec<Violation>),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Parse(msg) => write!(f, "parse error: {msg}"),
            DecodeError::Validation(vs) => {
                f.write_str("validation error")?;
                for (i, v) in vs.iter().enumerate() {
                    f.write_str(if i == 0 { ": " } else { "; " })?;
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DecodeError {}

/// Decodes one line (an optional trailing LF or CRLF is accepted).
///
/// Unknown keys are ignored.
pub fn decode_line(line: &[u8]) -> Result<LogEvent, DecodeError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    if line.iter().all(u8::is_ascii_whitespace) {
        return Err(DecodeError::Parse("empty line".to_string()));
    }
    let text = core::str::from_utf8(line)
        .map_err(|e| DecodeError::Parse(format!("invalid UTF-8: {e}")))?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| DecodeError::Parse(e.to_string()))?;
    match check(&value) {
        (Some(event), v) if v.is_empty() => Ok(event),
        (_, v) => Err(DecodeError::Validation(v)),
    }
}

/// Caps `text` at `max_chars` characters, ending truncated output with
/// `…[truncated, N total]` where N is the original character count.
pub fn truncate_summary(text: &str, max_chars: usize) -> String {
    let total = text.chars().count();
    if total <= max_chars {
        return text.to_string();
    }
    let suffix = format!("…[truncated, {total} total]");
    let suffix_len = suffix.chars().count();
    if suffix_len >= max_chars {
        return text.chars().take(max_chars).collect();
    }
    let mut out: String = text.chars().take(max_chars - suffix_len).collect();
    out.push_str(&suffix);
    out
}
