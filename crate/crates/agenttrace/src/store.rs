//! Append-only event store: numbered JSONL segments plus a trace index.
//!
//! Lines are written straight to the segment file, so everything appended is
//! in the OS page cache immediately. `index.json` is rewritten on
//! [`Store::flush`]; on open it is rebuilt from the segments regardless, and a
//! torn final line (no LF) is cut off.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use agenttrace_core::{decode_line, encode_line, EventId, LogEvent, Surface, Timestamp, TraceId};

pub const DEFAULT_SEGMENT_BYTES: u64 = 64 * 1024 * 1024;
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store io error: {0}")]
    Io(#[from] io::Error),
    #[error("store is full ({limit} bytes)")]
    StorageFull { limit: u64 },
    #[error("corrupt segment {segment} at byte {offset}: {reason}")]
    CorruptSegment { segment: u32, offset: u64, reason: String },
    #[error("event cannot be encoded: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    pub segment_bytes: u64,
    /// Total size limit across segments; `None` is unbounded.
    pub max_bytes: Option<u64>,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            segment_bytes: DEFAULT_SEGMENT_BYTES,
            max_bytes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Appended {
    Stored,
    Duplicate,
}

/// Conjunctive scan filter; unset fields match everything. The time range is
/// inclusive at both ends.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter {
    pub trace_id: Option<TraceId>,
    pub agent: Option<String>,
    pub surface: Option<Surface>,
    pub since: Option<Timestamp>,
    pub until: Option<Timestamp>,
}

impl Filter {
    pub fn matches(&self, e: &LogEvent) -> bool {
        self.trace_id.is_none_or(|t| t == e.trace_id)
            && self.agent.as_deref().is_none_or(|a| a == e.agent)
            && self.surface.is_none_or(|s| s == e.surface)
            && self.since.is_none_or(|t| e.timestamp >= t)
            && self.until.is_none_or(|t| e.timestamp <= t)
    }
}

pub type Index = BTreeMap<TraceId, Vec<(u32, u64)>>;

pub fn segment_name(n: u32) -> String {
    format!("segment-{n:06}.jsonl")
}

fn segment_numbers(dir: &Path) -> io::Result<Vec<u32>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(n) = name
            .strip_prefix("segment-")
            .and_then(|s| s.strip_suffix(".jsonl"))
            .and_then(|s| s.parse().ok())
        {
            out.push(n);
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Visits every complete line of every segment in append order. A final line
/// without LF is ignored (it is either being written or torn).
fn for_each_line(
    dir: &Path,
    mut f: impl FnMut(u32, u64, &[u8]) -> Result<(), StoreError>,
) -> Result<(), StoreError> {
    if !dir.exists() {
        return Ok(());
    }
    for seg in segment_numbers(dir)? {
        let mut reader = BufReader::new(File::open(dir.join(segment_name(seg)))?);
        let mut offset = 0u64;
        let mut line = Vec::new();
        loop {
            line.clear();
            let n = reader.read_until(b'\n', &mut line)?;
            if n == 0 || line.last() != Some(&b'\n') {
                break;
            }
            f(seg, offset, &line)?;
            offset += n as u64;
        }
    }
    Ok(())
}

fn decode_stored(seg: u32, offset: u64, line: &[u8]) -> Result<LogEvent, StoreError> {
    decode_line(line).map_err(|e| StoreError::CorruptSegment {
        segment: seg,
        offset,
        reason: e.to_string(),
    })
}

/// Reads matching events from a store directory without opening it for
/// writing. Safe to run while another process appends: only complete lines
/// are returned.
pub fn scan_dir(dir: &Path, filter: &Filter) -> Result<Vec<LogEvent>, StoreError> {
    let mut out = Vec::new();
    for_each_line(dir, |seg, offset, line| {
        let event = decode_stored(seg, offset, line)?;
        if filter.matches(&event) {
            out.push(event);
        }
        Ok(())
    })?;
    Ok(out)
}

/// Parses an `index.json` document.
pub fn parse_index(text: &str) -> Result<Index, String> {
    let raw: BTreeMap<String, Vec<(u32, u64)>> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    raw.into_iter()
        .map(|(k, v)| Ok((k.parse::<TraceId>().map_err(|e| e.to_string())?, v)))
        .collect()
}

pub struct Store {
    dir: PathBuf,
    opts: StoreOptions,
    index: Index,
    ids: HashSet<EventId>,
    segment: u32,
    writer: File,
    segment_len: u64,
    total_len: u64,
    events: u64,
}

impl Store {
    pub fn open(dir: impl AsRef<Path>, opts: StoreOptions) -> Result<Store, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let segments = segment_numbers(&dir)?;

        // Cut torn tails before indexing.
        for &seg in &segments {
            let path = dir.join(segment_name(seg));
            let mut bytes = Vec::new();
            File::open(&path)?.read_to_end(&mut bytes)?;
            let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
            if keep < bytes.len() {
                tracing::warn!(segment = seg, dropped = bytes.len() - keep, "truncating torn segment tail");
                OpenOptions::new().write(true).open(&path)?.set_len(keep as u64)?;
            }
        }

        let mut index = Index::new();
        let mut ids = HashSet::new();
        let mut total_len = 0;
        let mut events = 0;
        for_each_line(&dir, |seg, offset, line| {
            let event = decode_stored(seg, offset, line)?;
            index.entry(event.trace_id).or_default().push((seg, offset));
            ids.insert(event.event_id);
            total_len += line.len() as u64;
            events += 1;
            Ok(())
        })?;

        let segment = segments.last().copied().unwrap_or(0);
        let path = dir.join(segment_name(segment));
        let writer = OpenOptions::new().create(true).append(true).open(&path)?;
        let segment_len = writer.metadata()?.len();
        let store = Store {
            dir,
            opts,
            index,
            ids,
            segment,
            writer,
            segment_len,
            total_len,
            events,
        };
        store.write_index()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> u64 {
        self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events == 0
    }

    pub fn contains(&self, id: &EventId) -> bool {
        self.ids.contains(id)
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    /// Appends a validated event; a repeated event id is rejected without
    /// touching the store.
    pub fn append(&mut self, event: &LogEvent) -> Result<Appended, StoreError> {
        if self.ids.contains(&event.event_id) {
            return Ok(Appended::Duplicate);
        }
        let line = encode_line(event).map_err(|e| StoreError::Invalid(e.to_string()))?;
        let len = line.len() as u64;
        if let Some(limit) = self.opts.max_bytes {
            if self.total_len + len > limit {
                return Err(StoreError::StorageFull { limit });
            }
        }
        if self.segment_len > 0 && self.segment_len + len > self.opts.segment_bytes {
            self.rotate()?;
        }
        self.writer.write_all(&line)?;
        self.index.entry(event.trace_id).or_default().push((self.segment, self.segment_len));
        self.ids.insert(event.event_id);
        self.segment_len += len;
        self.total_len += len;
        self.events += 1;
        Ok(Appended::Stored)
    }

    fn rotate(&mut self) -> Result<(), StoreError> {
        self.writer.sync_data()?;
        self.segment += 1;
        self.writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(segment_name(self.segment)))?;
        self.segment_len = 0;
        Ok(())
    }

    fn write_index(&self) -> Result<(), StoreError> {
        let map: BTreeMap<String, &Vec<(u32, u64)>> = self.index.iter().map(|(k, v)| (k.to_string(), v)).collect();
        let tmp = self.dir.join("index.json.tmp");
        fs::write(&tmp, serde_json::to_vec(&map).expect("index serializes"))?;
        fs::rename(tmp, self.dir.join(INDEX_FILE))?;
        Ok(())
    }

    /// Syncs the active segment and rewrites the index.
    pub fn flush(&mut self) -> Result<(), StoreError> {
        self.writer.sync_data()?;
        self.write_index()
    }

    /// Events matching `filter` in append order. Trace-filtered scans go
    /// through the index; every returned line is re-validated.
    pub fn scan(&self, filter: &Filter) -> Result<Vec<LogEvent>, StoreError> {
        let Some(trace) = filter.trace_id else {
            return scan_dir(&self.dir, filter);
        };
        let mut out = Vec::new();
        let mut open: Option<(u32, BufReader<File>)> = None;
        let mut line = Vec::new();
        for &(seg, offset) in self.index.get(&trace).map_or(&[][..], Vec::as_slice) {
            if open.as_ref().is_none_or(|(s, _)| *s != seg) {
                open = Some((seg, BufReader::new(File::open(self.dir.join(segment_name(seg)))?)));
            }
            let reader = &mut open.as_mut().expect("just opened").1;
            reader.seek(SeekFrom::Start(offset))?;
            line.clear();
            reader.read_until(b'\n', &mut line)?;
            let event = decode_stored(seg, offset, &line)?;
            if event.trace_id != trace {
                return Err(StoreError::CorruptSegment {
                    segment: seg,
                    offset,
                    reason: "index points at an event of another trace".into(),
                });
            }
            if filter.matches(&event) {
                out.push(event);
            }
        }
        Ok(out)
    }
}

impl Drop for Store {
    fn drop(&mut self) {
        if let Err(e) = self.flush() {
            tracing::warn!(error = %e, "store flush on close failed");
        }
    }
}
