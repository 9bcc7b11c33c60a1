//! Settings resolved from flags, `AGENTTRACE_*` environment variables, a TOML
//! file, and defaults, in that order of precedence.
//!
//! Flags and environment variables are merged by clap (each flag declares its
//! variable), so this module only has to lay the file under them.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::export::ExporterConfig;
use crate::net::DEFAULT_MAX_BODY;
use crate::store::DEFAULT_SEGMENT_BYTES;

pub const DEFAULT_STORE: &str = "agenttrace-store";
pub const DEFAULT_STREAM_LISTEN: &str = "127.0.0.1:4317";
pub const DEFAULT_HTTP_LISTEN: &str = "127.0.0.1:4318";
pub const DEFAULT_STORE_FLUSH_MS: u64 = 100;
pub const DEFAULT_INGEST_QUEUE: usize = 1024;

/// The optional-everything shape shared by the TOML file and the
/// flag/environment layer.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub store: Option<PathBuf>,
    pub stream_listen: Option<String>,
    pub http_listen: Option<String>,
    pub max_body_bytes: Option<usize>,
    pub segment_bytes: Option<u64>,
    pub store_max_bytes: Option<u64>,
    pub store_flush_ms: Option<u64>,
    pub ingest_queue: Option<usize>,
    pub endpoint: Option<String>,
    pub batch_max: Option<usize>,
    pub flush_interval_ms: Option<u64>,
    pub queue_cap: Option<usize>,
    pub fallback_path: Option<PathBuf>,
    pub shutdown_deadline_ms: Option<u64>,
    pub mirror_contextual: Option<bool>,
}

impl Layer {
    /// Fills every unset field from `under`.
    pub fn over(self, under: Layer) -> Layer {
        macro_rules! pick {
            ($($f:ident),*) => { Layer { $($f: self.$f.or(under.$f)),* } };
        }
        pick!(
            store, stream_listen, http_listen, max_body_bytes, segment_bytes, store_max_bytes,
            store_flush_ms, ingest_queue, endpoint, batch_max, flush_interval_ms, queue_cap,
            fallback_path, shutdown_deadline_ms, mirror_contextual
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub fn load_file(path: &Path) -> Result<Layer, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigFileError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub store: PathBuf,
    pub stream_listen: String,
    pub http_listen: String,
    pub max_body_bytes: usize,
    pub segment_bytes: u64,
    pub store_max_bytes: Option<u64>,
    pub store_flush_ms: u64,
    pub ingest_queue: usize,
    pub exporter: ExporterConfig,
    /// Also write contextual spans to `contextual-mirror.jsonl` in the store
    /// directory.
    pub mirror_contextual: bool,
}

impl Settings {
    pub fn resolve(layer: Layer) -> Settings {
        let store = layer.store.unwrap_or_else(|| PathBuf::from(DEFAULT_STORE));
        let defaults = ExporterConfig::default();
        let exporter = ExporterConfig {
            endpoint: layer.endpoint.filter(|e| !e.is_empty()),
            batch_max: layer.batch_max.unwrap_or(defaults.batch_max),
            flush_interval_ms: layer.flush_interval_ms.unwrap_or(defaults.flush_interval_ms),
            queue_cap: layer.queue_cap.unwrap_or(defaults.queue_cap),
            fallback_path: layer
                .fallback_path
                .unwrap_or_else(|| store.join("export-fallback.jsonl")),
            shutdown_deadline_ms: layer.shutdown_deadline_ms.unwrap_or(defaults.shutdown_deadline_ms),
        };
        Settings {
            stream_listen: layer.stream_listen.unwrap_or_else(|| DEFAULT_STREAM_LISTEN.into()),
            http_listen: layer.http_listen.unwrap_or_else(|| DEFAULT_HTTP_LISTEN.into()),
            max_body_bytes: layer.max_body_bytes.unwrap_or(DEFAULT_MAX_BODY),
            segment_bytes: layer.segment_bytes.unwrap_or(DEFAULT_SEGMENT_BYTES),
            store_max_bytes: layer.store_max_bytes,
            store_flush_ms: layer.store_flush_ms.unwrap_or(DEFAULT_STORE_FLUSH_MS),
            ingest_queue: layer.ingest_queue.unwrap_or(DEFAULT_INGEST_QUEUE),
            mirror_contextual: layer.mirror_contextual.unwrap_or(false),
            exporter,
            store,
        }
    }

    pub fn mirror_path(&self) -> Option<PathBuf> {
        self.mirror_contextual.then(|| self.store.join("contextual-mirror.jsonl"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_layer_wins_field_by_field() {
        let file = Layer {
            batch_max: Some(10),
            queue_cap: Some(100),
            ..Layer::default()
        };
        let flags = Layer {
            batch_max: Some(20),
            ..Layer::default()
        };
        let s = Settings::resolve(flags.over(file));
        assert_eq!(s.exporter.batch_max, 20);
        assert_eq!(s.exporter.queue_cap, 100);
        assert_eq!(s.exporter.flush_interval_ms, 1000);
        assert!(!s.mirror_contextual);
    }

    #[test]
    fn toml_file_parses_and_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "store = \"/tmp/s\"\nbatch_max = 7\nmirror_contextual = true\n").unwrap();
        let layer = load_file(&path).unwrap();
        assert_eq!(layer.batch_max, Some(7));
        assert_eq!(layer.mirror_contextual, Some(true));
        std::fs::write(&path, "bogus = 1\n").unwrap();
        assert!(matches!(load_file(&path), Err(ConfigFileError::Parse { .. })));
    }

    #[test]
    fn defaults() {
        let s = Settings::resolve(Layer::default());
        assert_eq!(s.exporter, ExporterConfig {
            fallback_path: PathBuf::from(DEFAULT_STORE).join("export-fallback.jsonl"),
            ..ExporterConfig::default()
        });
        assert_eq!(s.max_body_bytes, 16 * 1024 * 1024);
        assert_eq!(s.store_flush_ms, 100);
    }
}
