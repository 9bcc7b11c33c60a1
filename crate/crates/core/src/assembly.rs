//! Span pairing and trace-tree reconstruction.
//!
//! Assembly is a pure fold over an event multiset: events are first put in
//! `(timestamp, event_id)` order, so any permutation of the same input gives
//! the same spans, tree, and anomalies.

use alloc::collections::btree_map::Entry;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ids::{EventId, SpanId, TraceId};
use crate::json::write_f64;
use crate::schema::{LogEvent, OpStatus, Surface, SurfaceBody};
use crate::time::Timestamp;

/// Allowed gap between the emitter-reported duration and the timestamp delta.
pub const DURATION_TOLERANCE_MS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Complete,
    Error,
    Open,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Complete => "complete",
            Outcome::Error => "error",
            Outcome::Open => "open",
        }
    }
}

/// A cognitive or contextual event hung off a span.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachedEvent {
    pub event_id: EventId,
    pub surface: Surface,
    pub timestamp: Timestamp,
    /// The span id the event itself carries.
    pub span_id: SpanId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanRecord {
    pub span_id: SpanId,
    pub trace_id: TraceId,
    pub parent_span_id: Option<SpanId>,
    pub agent: String,
    pub name: String,
    pub start_ts: Timestamp,
    pub end_ts: Option<Timestamp>,
    /// As reported by the emitter on the terminal event.
    pub duration_ms: Option<f64>,
    pub outcome: Outcome,
    pub start_event: EventId,
    pub terminal_event: Option<EventId>,
    pub attached_events: Vec<AttachedEvent>,
}

impl SpanRecord {
    fn sort_key(&self) -> (Timestamp, SpanId) {
        (self.start_ts, self.span_id)
    }

    /// Number of input events this span accounts for.
    pub fn event_count(&self) -> usize {
        1 + usize::from(self.terminal_event.is_some()) + self.attached_events.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnomalyKind {
    /// complete/error with no matching start.
    MissingStart,
    /// A second complete/error for an already-terminated span.
    DuplicateTerminal,
    /// A second start for the same span id.
    DuplicateStart,
    /// Same event id seen twice.
    DuplicateEvent,
    /// Event belongs to a different trace than the rest of the batch.
    ForeignTrace,
}

impl AnomalyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::MissingStart => "missing_start",
            AnomalyKind::DuplicateTerminal => "duplicate_terminal",
            AnomalyKind::DuplicateStart => "duplicate_start",
            AnomalyKind::DuplicateEvent => "duplicate_event",
            AnomalyKind::ForeignTrace => "foreign_trace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub span_id: SpanId,
    pub event_id: EventId,
}

/// Result of [`pair_events`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pairing {
    pub trace_id: Option<TraceId>,
    /// Sorted by `(start_ts, span_id)`.
    pub spans: Vec<SpanRecord>,
    pub anomalies: Vec<Anomaly>,
    /// Cognitive/contextual events whose span (and parent span) is unknown.
    pub unanchored: Vec<AttachedEvent>,
}

impl Pairing {
    /// Events consumed: paired operational + attached + unanchored + anomalous.
    pub fn accounted(&self) -> usize {
        self.spans.iter().map(SpanRecord::event_count).sum::<usize>()
            + self.unanchored.len()
            + self.anomalies.len()
    }
}

fn ordered(events: &[LogEvent]) -> Vec<&LogEvent> {
    let mut sorted: Vec<&LogEvent> = events.iter().collect();
    sorted.sort_by_key(|e| (e.timestamp, e.event_id));
    sorted
}

/// Matches start events with their terminal events and attaches
/// cognitive/contextual events to spans.
///
/// Expects a single trace; events from other traces are reported as
/// [`AnomalyKind::ForeignTrace`]. The trace is that of the earliest event.
pub fn pair_events(events: &[LogEvent]) -> Pairing {
    let sorted = ordered(events);
    let trace_id = sorted.first().map(|e| e.trace_id);
    let mut anomalies = Vec::new();
    let mut seen = BTreeSet::new();
    let mut starts: BTreeMap<SpanId, &LogEvent> = BTreeMap::new();
    let mut terminals: BTreeMap<SpanId, &LogEvent> = BTreeMap::new();
    let mut others = Vec::new();

    for &e in &sorted {
        let anomaly = |kind| Anomaly {
            kind,
            span_id: e.span_id,
            event_id: e.event_id,
        };
        if !seen.insert(e.event_id) {
            anomalies.push(anomaly(AnomalyKind::DuplicateEvent));
            continue;
        }
        if Some(e.trace_id) != trace_id {
            anomalies.push(anomaly(AnomalyKind::ForeignTrace));
            continue;
        }
        match &e.body {
            SurfaceBody::Operational(op) if op.status == OpStatus::Start => {
                match starts.entry(e.span_id) {
                    Entry::Occupied(_) => anomalies.push(anomaly(AnomalyKind::DuplicateStart)),
                    Entry::Vacant(v) => {
                        v.insert(e);
                    }
                }
            }
            SurfaceBody::Operational(_) => {
                match terminals.entry(e.span_id) {
                    Entry::Occupied(_) => anomalies.push(anomaly(AnomalyKind::DuplicateTerminal)),
                    Entry::Vacant(v) => {
                        v.insert(e);
                    }
                }
            }
            _ => others.push(e),
        }
    }

    for (span_id, t) in &terminals {
        if !starts.contains_key(span_id) {
            anomalies.push(Anomaly {
                kind: AnomalyKind::MissingStart,
                span_id: *span_id,
                event_id: t.event_id,
            });
        }
    }

    let mut spans: BTreeMap<SpanId, SpanRecord> = starts
        .iter()
        .map(|(span_id, s)| {
            let terminal = terminals.get(span_id).copied();
            let (outcome, duration_ms) = match terminal.and_then(|t| t.operational()) {
                Some(op) if op.status == OpStatus::Error => (Outcome::Error, op.duration_ms),
                Some(op) => (Outcome::Complete, op.duration_ms),
                None => (Outcome::Open, None),
            };
            let record = SpanRecord {
                span_id: *span_id,
                trace_id: s.trace_id,
                parent_span_id: s.parent_span_id,
                agent: s.agent.clone(),
                name: s.operational().map(|op| op.method.clone()).unwrap_or_default(),
                start_ts: s.timestamp,
                end_ts: terminal.map(|t| t.timestamp),
                duration_ms,
                outcome,
                start_event: s.event_id,
                terminal_event: terminal.map(|t| t.event_id),
                attached_events: Vec::new(),
            };
            (*span_id, record)
        })
        .collect();

    let mut unanchored = Vec::new();
    for e in others {
        let attached = AttachedEvent {
            event_id: e.event_id,
            surface: e.surface,
            timestamp: e.timestamp,
            span_id: e.span_id,
        };
        let host = if spans.contains_key(&e.span_id) {
            Some(e.span_id)
        } else {
            e.parent_span_id.filter(|p| spans.contains_key(p))
        };
        match host.and_then(|h| spans.get_mut(&h)) {
            Some(span) => span.attached_events.push(attached),
            None => unanchored.push(attached),
        }
    }

    let mut spans: Vec<SpanRecord> = spans.into_values().collect();
    spans.sort_by_key(SpanRecord::sort_key);
    anomalies.sort();
    Pairing {
        trace_id,
        spans,
        anomalies,
        unanchored,
    }
}

/// Splits a mixed stream into per-trace event lists.
pub fn partition_by_trace(events: &[LogEvent]) -> BTreeMap<TraceId, Vec<LogEvent>> {
    let mut out: BTreeMap<TraceId, Vec<LogEvent>> = BTreeMap::new();
    for e in events {
        out.entry(e.trace_id).or_default().push(e.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceTree {
    pub trace_id: Option<TraceId>,
    pub roots: Vec<SpanRecord>,
    /// Children of each span, ordered by `(start_ts, span_id)`.
    pub children: BTreeMap<SpanId, Vec<SpanRecord>>,
    /// Spans whose parent is not in the trace.
    pub orphans: Vec<SpanRecord>,
    pub unanchored: Vec<AttachedEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// Parent links among these spans form a cycle.
    Cycle(Vec<SpanId>),
    DuplicateSpan(SpanId),
    MixedTraces(TraceId, TraceId),
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::Cycle(ids) => {
                f.write_str("parent links form a cycle through")?;
                for id in ids {
                    write!(f, " {id}")?;
                }
                Ok(())
            }
            TreeError::DuplicateSpan(id) => write!(f, "span {id} appears twice"),
            TreeError::MixedTraces(a, b) => write!(f, "spans from traces {a} and {b}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TreeError {}

impl TraceTree {
    /// Top-level spans: roots followed by orphans.
    pub fn tops(&self) -> impl DoubleEndedIterator<Item = &SpanRecord> {
        self.roots.iter().chain(self.orphans.iter())
    }

    pub fn children_of(&self, span: SpanId) -> &[SpanRecord] {
        self.children.get(&span).map_or(&[], Vec::as_slice)
    }

    /// Depth-first pre-order walk yielding `(depth, parent, span)`.
    pub fn walk(&self) -> Vec<(usize, Option<&SpanRecord>, &SpanRecord)> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Option<&SpanRecord>, &SpanRecord)> =
            self.tops().rev().map(|s| (0, None, s)).collect();
        while let Some((depth, parent, span)) = stack.pop() {
            out.push((depth, parent, span));
            for child in self.children_of(span.span_id).iter().rev() {
                stack.push((depth + 1, Some(span), child));
            }
        }
        out
    }

    pub fn span_count(&self) -> usize {
        self.roots.len() + self.orphans.len() + self.children.values().map(Vec::len).sum::<usize>()
    }
}

/// Resolves parent links into a forest.
pub fn build_trace_tree(spans: Vec<SpanRecord>) -> Result<TraceTree, TreeError> {
    build_tree_with(spans, Vec::new())
}

fn build_tree_with(
    mut spans: Vec<SpanRecord>,
    unanchored: Vec<AttachedEvent>,
) -> Result<TraceTree, TreeError> {
    spans.sort_by_key(SpanRecord::sort_key);
    let trace_id = spans.first().map(|s| s.trace_id);
    let mut known = BTreeSet::new();
    for s in &spans {
        if let Some(t) = trace_id {
            if s.trace_id != t {
                return Err(TreeError::MixedTraces(t, s.trace_id));
            }
        }
        if !known.insert(s.span_id) {
            return Err(TreeError::DuplicateSpan(s.span_id));
        }
    }

    let mut tree = TraceTree {
        trace_id,
        unanchored,
        ..TraceTree::default()
    };
    for s in spans {
        match s.parent_span_id {
            None => tree.roots.push(s),
            Some(p) if !known.contains(&p) => tree.orphans.push(s),
            Some(p) => tree.children.entry(p).or_default().push(s),
        }
    }

    let reachable = tree.walk().len();
    if reachable != known.len() {
        let mut reached: BTreeSet<SpanId> = tree.walk().iter().map(|(_, _, s)| s.span_id).collect();
        let stuck: Vec<SpanId> = known.into_iter().filter(|id| !reached.remove(id)).collect();
        return Err(TreeError::Cycle(stuck));
    }
    Ok(tree)
}

/// Pairing plus tree for one trace's events.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub tree: TraceTree,
    pub anomalies: Vec<Anomaly>,
}

impl Assembly {
    pub fn accounted(&self) -> usize {
        self.tree.walk().iter().map(|(_, _, s)| s.event_count()).sum::<usize>()
            + self.tree.unanchored.len()
            + self.anomalies.len()
    }
}

pub fn assemble(events: &[LogEvent]) -> Result<Assembly, TreeError> {
    let pairing = pair_events(events);
    let tree = build_tree_with(pairing.spans, pairing.unanchored)?;
    Ok(Assembly {
        tree,
        anomalies: pairing.anomalies,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CausalityViolation {
    ChildBeforeParent { parent: SpanId, child: SpanId },
    EndBeforeStart { span: SpanId },
    DurationMismatch { span: SpanId, reported_ms: f64, observed_ms: f64 },
    EventOutsideSpan { span: SpanId, event: EventId },
}

impl fmt::Display for CausalityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CausalityViolation::ChildBeforeParent { parent, child } => {
                write!(f, "child {child} starts before parent {parent}")
            }
            CausalityViolation::EndBeforeStart { span } => write!(f, "span {span} ends before it starts"),
            CausalityViolation::DurationMismatch {
                span,
                reported_ms,
                observed_ms,
            } => write!(
                f,
                "span {span} reports {reported_ms} ms but timestamps give {observed_ms} ms"
            ),
            CausalityViolation::EventOutsideSpan { span, event } => {
                write!(f, "event {event} lies outside span {span}")
            }
        }
    }
}

/// Reports every temporal-ordering breach in the tree, in walk order.
pub fn check_causality(tree: &TraceTree) -> Vec<CausalityViolation> {
    let mut out = Vec::new();
    for (_, parent, span) in tree.walk() {
        if let Some(parent) = parent {
            if span.start_ts < parent.start_ts {
                out.push(CausalityViolation::ChildBeforeParent {
                    parent: parent.span_id,
                    child: span.span_id,
                });
            }
        }
        if let Some(end) = span.end_ts {
            if end < span.start_ts {
                out.push(CausalityViolation::EndBeforeStart { span: span.span_id });
            } else if let Some(reported) = span.duration_ms {
                let observed = (end.as_unix_micros() - span.start_ts.as_unix_micros()) as f64 / 1000.0;
                if (observed - reported).abs() > DURATION_TOLERANCE_MS {
                    out.push(CausalityViolation::DurationMismatch {
                        span: span.span_id,
                        reported_ms: reported,
                        observed_ms: observed,
                    });
                }
            }
        }
        for ev in &span.attached_events {
            let after_start = ev.timestamp >= span.start_ts;
            let before_end = span.end_ts.is_none_or(|end| ev.timestamp <= end);
            if !(after_start && before_end) {
                out.push(CausalityViolation::EventOutsideSpan {
                    span: span.span_id,
                    event: ev.event_id,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SurfaceCounts {
    pub operational: u64,
    pub cognitive: u64,
    pub contextual: u64,
}

impl SurfaceCounts {
    pub fn add(&mut self, surface: Surface, n: u64) {
        match surface {
            Surface::Operational => self.operational += n,
            Surface::Cognitive => self.cognitive += n,
            Surface::Contextual => self.contextual += n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsSummary {
    pub trace_count: u64,
    pub span_count: u64,
    /// Longest parent-to-descendant chain, in edges.
    pub depth: u64,
    pub total_duration_ms: f64,
    /// Largest root-to-leaf sum of span durations; open spans count as 0.
    pub critical_path_ms: f64,
    pub error_count: u64,
    pub open_count: u64,
    pub orphan_count: u64,
    pub events: SurfaceCounts,
    pub unanchored_events: u64,
}

impl StatsSummary {
    /// Folds another trace's summary into this one: counts add, depth and
    /// critical path take the maximum.
    pub fn merge(&mut self, other: &StatsSummary) {
        self.trace_count += other.trace_count;
        self.span_count += other.span_count;
        self.depth = self.depth.max(other.depth);
        self.total_duration_ms += other.total_duration_ms;
        self.critical_path_ms = self.critical_path_ms.max(other.critical_path_ms);
        self.error_count += other.error_count;
        self.open_count += other.open_count;
        self.orphan_count += other.orphan_count;
        self.events.operational += other.events.operational;
        self.events.cognitive += other.events.cognitive;
        self.events.contextual += other.events.contextual;
        self.unanchored_events += other.unanchored_events;
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let mut w = crate::json::ObjectWriter::new(&mut out);
        w.int("trace_count", self.trace_count)
            .int("span_count", self.span_count)
            .int("depth", self.depth)
            .float("total_duration_ms", self.total_duration_ms)
            .float("critical_path_ms", self.critical_path_ms)
            .int("error_count", self.error_count)
            .int("open_count", self.open_count)
            .int("orphan_count", self.orphan_count)
            .raw("events", |out| {
                let mut e = crate::json::ObjectWriter::new(out);
                e.int("operational", self.events.operational)
                    .int("cognitive", self.events.cognitive)
                    .int("contextual", self.events.contextual)
                    .finish();
            })
            .int("unanchored_events", self.unanchored_events);
        w.finish();
        out
    }
}

pub fn trace_stats(tree: &TraceTree) -> StatsSummary {
    let mut stats = StatsSummary {
        trace_count: u64::from(tree.trace_id.is_some() || !tree.unanchored.is_empty()),
        orphan_count: tree.orphans.len() as u64,
        unanchored_events: tree.unanchored.len() as u64,
        ..StatsSummary::default()
    };
    // Path sums along the walk; parents are always visited before children.
    let mut path: BTreeMap<SpanId, f64> = BTreeMap::new();
    for (depth, parent, span) in tree.walk() {
        let own = span.duration_ms.unwrap_or(0.0);
        let along = parent.map_or(0.0, |p| path[&p.span_id]) + own;
        path.insert(span.span_id, along);
        if tree.children_of(span.span_id).is_empty() && along > stats.critical_path_ms {
            stats.critical_path_ms = along;
        }
        stats.span_count += 1;
        stats.depth = stats.depth.max(depth as u64);
        stats.total_duration_ms += own;
        match span.outcome {
            Outcome::Error => stats.error_count += 1,
            Outcome::Open => stats.open_count += 1,
            Outcome::Complete => {}
        }
        stats.events.add(
            Surface::Operational,
            1 + u64::from(span.terminal_event.is_some()),
        );
        for ev in &span.attached_events {
            stats.events.add(ev.surface, 1);
        }
    }
    for ev in &tree.unanchored {
        stats.events.add(ev.surface, 1);
    }
    stats
}

/// One span per line: `name [outcome, duration_ms] span_id`, children
/// indented two spaces under their parent; open spans show `-` for duration.
pub fn render_tree(tree: &TraceTree) -> String {
    let mut out = String::new();
    for (depth, _, span) in tree.walk() {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push_str(&span.name);
        out.push_str(" [");
        out.push_str(span.outcome.as_str());
        out.push_str(", ");
        match span.duration_ms {
            Some(d) => write_f64(&mut out, d),
            None => out.push('-'),
        }
        out.push_str("] ");
        let _ = fmt::Write::write_fmt(&mut out, format_args!("{}\n", span.span_id));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{CognitiveBody, ExtractionStrategy, Level, OperationalBody};
    use alloc::string::ToString;
    use alloc::vec;

    const TRACE: &str = "4bf92f3577b34da6a3ce929d0e0e4736";

    fn sid(n: u64) -> SpanId {
        SpanId::from_bytes(n.to_be_bytes()).unwrap()
    }

    fn eid(n: u32) -> EventId {
        let mut b = [0u8; 16];
        b[12..].copy_from_slice(&n.to_be_bytes());
        EventId::from_random_bytes(b)
    }

    fn at(ms: i64) -> Timestamp {
        Timestamp::from_unix_micros(1_700_000_000_000_000 + ms * 1000).unwrap()
    }

    fn op(n: u32, span: u64, parent: Option<u64>, ms: i64, body: OperationalBody) -> LogEvent {
        LogEvent {
            event_id: eid(n),
            surface: Surface::Operational,
            trace_id: TraceId::parse(TRACE).unwrap(),
            span_id: sid(span),
            parent_span_id: parent.map(sid),
            timestamp: at(ms),
            agent: "a".into(),
            level: Level::Info,
            body: SurfaceBody::Operational(body),
        }
    }

    fn call(first_event: u32, span: u64, parent: Option<u64>, name: &str, start: i64, dur: i64) -> [LogEvent; 2] {
        [
            op(first_event, span, parent, start, OperationalBody::start(name)),
            op(
                first_event + 1,
                span,
                parent,
                start + dur,
                OperationalBody::complete(name, dur as f64),
            ),
        ]
    }

    /// Root (10 ms) with children b (4 ms) and c (3 ms); b has child d (2 ms).
    fn depth_two_fixture() -> Vec<LogEvent> {
        let mut events = Vec::new();
        events.extend(call(1, 1, None, "run", 0, 10));
        events.extend(call(3, 2, Some(1), "plan", 1, 4));
        events.extend(call(5, 3, Some(1), "act", 6, 3));
        events.extend(call(7, 4, Some(2), "llm", 2, 2));
        events
    }

    #[test]
    fn single_pair() {
        let p = pair_events(&call(1, 1, None, "run", 0, 5));
        assert_eq!(p.spans.len(), 1);
        assert_eq!(p.spans[0].outcome, Outcome::Complete);
        assert_eq!(p.spans[0].duration_ms, Some(5.0));
        assert!(p.anomalies.is_empty());
    }

    #[test]
    fn lone_start_is_open() {
        let p = pair_events(&[op(1, 1, None, 0, OperationalBody::start("run"))]);
        assert_eq!(p.spans[0].outcome, Outcome::Open);
        assert_eq!(p.spans[0].end_ts, None);
        assert!(p.anomalies.is_empty());
    }

    #[test]
    fn anomalies_are_detected() {
        let mut events = call(1, 1, None, "run", 0, 5).to_vec();
        events.push(op(3, 1, None, 9, OperationalBody::complete("run", 9.0)));
        events.push(op(4, 2, None, 3, OperationalBody::error("x", 1.0, "boom")));
        let p = pair_events(&events);
        let kinds: Vec<_> = p.anomalies.iter().map(|a| a.kind).collect();
        assert_eq!(kinds, vec![AnomalyKind::MissingStart, AnomalyKind::DuplicateTerminal]);
        // First terminal by timestamp wins.
        assert_eq!(p.spans[0].duration_ms, Some(5.0));
        assert_eq!(p.accounted(), events.len());
    }

    #[test]
    fn depth_two_tree_and_stats() {
        let a = assemble(&depth_two_fixture()).unwrap();
        let tree = &a.tree;
        assert_eq!(tree.roots.len(), 1);
        let kids: Vec<_> = tree.children_of(sid(1)).iter().map(|s| s.name.as_str()).collect();
        assert_eq!(kids, ["plan", "act"]);
        assert_eq!(tree.children_of(sid(2))[0].name, "llm");
        assert!(check_causality(tree).is_empty());

        let stats = trace_stats(tree);
        assert_eq!(stats.span_count, 4);
        assert_eq!(stats.depth, 2);
        assert_eq!(stats.total_duration_ms, 19.0);
        // Paths: 10+4+2=16, 10+3=13.
        assert_eq!(stats.critical_path_ms, 16.0);
        assert_eq!(stats.events.operational, 8);

        assert_eq!(
            render_tree(tree),
            "run [complete, 10] 0000000000000001\n  plan [complete, 4] 0000000000000002\n    llm [complete, 2] 0000000000000004\n  act [complete, 3] 0000000000000003\n"
        );
    }

    #[test]
    fn empty_trace_is_all_zero() {
        let tree = build_trace_tree(Vec::new()).unwrap();
        assert_eq!(trace_stats(&tree), StatsSummary::default());
        assert_eq!(render_tree(&tree), "");
    }

    #[test]
    fn child_before_parent_is_flagged() {
        let mut events = call(1, 1, None, "run", 10, 10).to_vec();
        let mut child = call(3, 2, Some(1), "plan", 10, 2);
        child[0].timestamp = child[0].timestamp.offset_micros(-1);
        events.extend(child);
        let v = check_causality(&assemble(&events).unwrap().tree);
        assert_eq!(
            v,
            vec![CausalityViolation::ChildBeforeParent {
                parent: sid(1),
                child: sid(2)
            }]
        );
    }

    #[test]
    fn cycles_are_errors() {
        let mut events = call(1, 1, Some(2), "a", 0, 1).to_vec();
        events.extend(call(3, 2, Some(1), "b", 0, 1));
        match assemble(&events) {
            Err(TreeError::Cycle(ids)) => assert_eq!(ids, vec![sid(1), sid(2)]),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn orphans_and_attachment() {
        let mut events = call(1, 1, Some(99), "orphan", 0, 5).to_vec();
        let mut cog = op(3, 1, None, 2, OperationalBody::start("unused"));
        cog.surface = Surface::Cognitive;
        cog.body = SurfaceBody::Cognitive(CognitiveBody {
            thought: Some("t".to_string()),
            ..CognitiveBody::empty(ExtractionStrategy::XmlTag)
        });
        events.push(cog.clone());
        // Own span id with the operational span as parent: attaches via parent.
        let mut nested = cog.clone();
        nested.event_id = eid(4);
        nested.span_id = sid(7);
        nested.parent_span_id = Some(sid(1));
        events.push(nested);
        let mut lost = cog;
        lost.event_id = eid(5);
        lost.span_id = sid(8);
        events.push(lost);

        let a = assemble(&events).unwrap();
        assert_eq!(a.tree.orphans.len(), 1);
        assert!(a.tree.roots.is_empty());
        assert_eq!(a.tree.orphans[0].attached_events.len(), 2);
        assert_eq!(a.tree.unanchored.len(), 1);
        assert_eq!(a.accounted(), events.len());
        let stats = trace_stats(&a.tree);
        assert_eq!(stats.events.cognitive, 3);
        assert_eq!(stats.unanchored_events, 1);
    }
}
