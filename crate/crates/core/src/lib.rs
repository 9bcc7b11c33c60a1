//! Core record model and analysis for agent telemetry.
//!
//! Events from three surfaces (operational, cognitive, contextual) share one
//! envelope ([`schema::LogEvent`]) with a bit-exact JSONL encoding. On top of
//! that this crate provides reasoning extraction from completion text
//! ([`extract`]), span pairing and trace-tree reconstruction ([`assembly`]),
//! and conversion of events into backend spans ([`span`]).
//!
//! Everything here is pure and allocation-only; file, socket, and HTTP
//! handling live in the `agenttrace` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assembly;
pub mod extract;
pub mod ids;
pub mod json;
pub mod schema;
pub mod span;
pub mod time;

pub use ids::{EventId, IdError, SpanId, TraceId};
pub use schema::{
    decode_line, encode_line, validate_event, CognitiveBody, ContextualBody, ContextualOp,
    DecodeError, EncodeError, ExtractionStrategy, Level, LogEvent, OpStatus, OperationalBody,
    Rule, Surface, SurfaceBody, Validation, Violation,
};
pub use time::Timestamp;

/// Schema version embedded in every exported artifact that needs one.
pub const SCHEMA_VERSION: u32 = 1;
