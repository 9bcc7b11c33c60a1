//! Collector side of agent telemetry: ingest over files, sockets, and HTTP
//! into an append-only store; span export with local fallback; and the
//! `agenttrace` command line.

pub mod cli;
pub mod config;
pub mod export;
pub mod ingest;
pub mod net;
pub mod store;
