//! Command-line front end. Machine-readable results go to stdout, prose to
//! stderr. Exit codes: 0 success, 1 data-level findings, 2 environment or
//! usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use agenttrace_core::assembly::{assemble, partition_by_trace, render_tree, trace_stats, StatsSummary};
use agenttrace_core::extract::{maybe_extract_cognitive, CognitivePayload};
use agenttrace_core::json::ObjectWriter;
use agenttrace_core::{Surface, Timestamp, TraceId};

use crate::config::{load_file, Layer, Settings};
use crate::export::{Exporter, LiveExport};
use crate::ingest::{ingest_file, Appender, AppendHook, DryRun, IngestReport};
use crate::net::{HttpServer, StreamServer};
use crate::store::{scan_dir, Filter, Store, StoreError, StoreOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ENV: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "agenttrace", version, about = "Agent telemetry collector and trace analysis")]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "AGENTTRACE_STORE")]
    pub store: Option<PathBuf>,
    /// TOML config file.
    #[arg(long, global = true, env = "AGENTTRACE_CONFIG")]
    pub config: Option<PathBuf>,
    /// More logging on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode and validate a JSONL file without storing it.
    Validate { path: PathBuf },
    /// Append a JSONL file to the store.
    Ingest {
        path: PathBuf,
        /// Keep reading appended lines until interrupted.
        #[arg(long)]
        follow: bool,
    },
    /// Print the span tree of one trace.
    Tree { trace_id: String },
    /// Summary statistics over stored events, as JSON.
    Stats(StatsArgs),
    /// Run cognitive extraction over raw completions, one JSON line each.
    Extract { path: PathBuf },
    /// Run stream and HTTP ingest with live span export.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub trace: Option<String>,
    #[arg(long)]
    pub agent: Option<String>,
    #[arg(long)]
    pub surface: Option<String>,
    /// Inclusive lower bound, RFC 3339 with microseconds.
    #[arg(long)]
    pub since: Option<String>,
    #[arg(long)]
    pub until: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "AGENTTRACE_STREAM_LISTEN")]
    pub stream_listen: Option<String>,
    #[arg(long, env = "AGENTTRACE_HTTP_LISTEN")]
    pub http_listen: Option<String>,
    #[arg(long, env = "AGENTTRACE_MAX_BODY_BYTES")]
    pub max_body_bytes: Option<usize>,
    #[arg(long, env = "AGENTTRACE_SEGMENT_BYTES")]
    pub segment_bytes: Option<u64>,
    #[arg(long, env = "AGENTTRACE_STORE_MAX_BYTES")]
    pub store_max_bytes: Option<u64>,
    #[arg(long, env = "AGENTTRACE_STORE_FLUSH_MS")]
    pub store_flush_ms: Option<u64>,
    #[arg(long, env = "AGENTTRACE_INGEST_QUEUE")]
    pub ingest_queue: Option<usize>,
    #[arg(long, env = "AGENTTRACE_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, env = "AGENTTRACE_BATCH_MAX")]
    pub batch_max: Option<usize>,
    #[arg(long, env = "AGENTTRACE_FLUSH_INTERVAL_MS")]
    pub flush_interval_ms: Option<u64>,
    #[arg(long, env = "AGENTTRACE_QUEUE_CAP")]
    pub queue_cap: Option<usize>,
    #[arg(long, env = "AGENTTRACE_FALLBACK_PATH")]
    pub fallback_path: Option<PathBuf>,
    #[arg(long, env = "AGENTTRACE_SHUTDOWN_DEADLINE_MS")]
    pub shutdown_deadline_ms: Option<u64>,
    #[arg(long, env = "AGENTTRACE_MIRROR_CONTEXTUAL")]
    pub mirror_contextual: Option<bool>,
}

impl ServeArgs {
    fn layer(&self) -> Layer {
        Layer {
            store: None,
            stream_listen: self.stream_listen.clone(),
            http_listen: self.http_listen.clone(),
            max_body_bytes: self.max_body_bytes,
            segment_bytes: self.segment_bytes,
            store_max_bytes: self.store_max_bytes,
            store_flush_ms: self.store_flush_ms,
            ingest_queue: self.ingest_queue,
            endpoint: self.endpoint.clone(),
            batch_max: self.batch_max,
            flush_interval_ms: self.flush_interval_ms,
            queue_cap: self.queue_cap,
            fallback_path: self.fallback_path.clone(),
            shutdown_deadline_ms: self.shutdown_deadline_ms,
            mirror_contextual: self.mirror_contextual,
        }
    }
}

/// Failure carrying its exit code; the message goes to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn env_err(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_ENV,
        message: message.into(),
    }
}

fn findings(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_FINDINGS,
        message: message.into(),
    }
}

fn store_failure(e: StoreError) -> Failure {
    match e {
        StoreError::CorruptSegment { .. } => findings(e.to_string()),
        _ => env_err(e.to_string()),
    }
}

/// Parses `args` and runs the command, writing results to `out`. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ENV } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("agenttrace: {}", f.message);
            f.code
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .try_init();
}

fn settings(cli: &Cli, flags: Layer) -> Result<Settings, Failure> {
    let file = match &cli.config {
        Some(path) => load_file(path).map_err(|e| env_err(e.to_string()))?,
        None => Layer::default(),
    };
    let top = Layer {
        store: cli.store.clone(),
        ..flags
    };
    Ok(Settings::resolve(top.over(file)))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Validate { path } => cmd_validate(path, out),
        Command::Ingest { path, follow } => cmd_ingest(&settings(cli, Layer::default())?, path, *follow, out),
        Command::Tree { trace_id } => cmd_tree(&settings(cli, Layer::default())?.store, trace_id, out),
        Command::Stats(args) => cmd_stats(&settings(cli, Layer::default())?.store, args, out),
        Command::Extract { path } => cmd_extract(path, out),
        Command::Serve(args) => cmd_serve(&settings(cli, args.layer())?, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    writeln!(out, "{text}").map_err(|e| env_err(format!("cannot write output: {e}")))
}

fn report_exit(report: &IngestReport) -> i32 {
    if report.error_count() == 0 && report.store_errors == 0 {
        EXIT_OK
    } else {
        EXIT_FINDINGS
    }
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let report = ingest_file(path, None, &mut DryRun::default())
        .map_err(|e| env_err(format!("cannot read {}: {e}", path.display())))?;
    emit(out, &report.to_json())?;
    for s in &report.samples {
        eprintln!("line {}: {} error: {}", s.line, s.kind.as_str(), s.reason);
    }
    Ok(report_exit(&report))
}

fn cmd_ingest(settings: &Settings, path: &Path, follow: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut store = open_store(settings)?;
    let report = if follow {
        let running = Arc::new(AtomicBool::new(true));
        let stop = Arc::new(AtomicBool::new(false));
        register_signals(&stop)?;
        let watcher = {
            let (running, stop) = (running.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::Acquire) {
                    std::thread::sleep(Duration::from_millis(50));
                }
                running.store(false, Ordering::Release);
            })
        };
        let r = ingest_file(path, Some(&running), &mut store);
        stop.store(true, Ordering::Release);
        let _ = watcher.join();
        r
    } else {
        ingest_file(path, None, &mut store)
    }
    .map_err(|e| env_err(format!("cannot read {}: {e}", path.display())))?;
    store.flush().map_err(store_failure)?;
    emit(out, &report.to_json())?;
    Ok(report_exit(&report))
}

fn open_store(settings: &Settings) -> Result<Store, Failure> {
    let opts = StoreOptions {
        segment_bytes: settings.segment_bytes,
        max_bytes: settings.store_max_bytes,
    };
    Store::open(&settings.store, opts).map_err(store_failure)
}

fn parse_trace(s: &str) -> Result<TraceId, Failure> {
    s.parse().map_err(|e| env_err(format!("invalid trace id {s:?}: {e}")))
}

pub fn cmd_tree(store: &Path, trace_id: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    let trace = parse_trace(trace_id)?;
    let filter = Filter {
        trace_id: Some(trace),
        ..Filter::default()
    };
    let events = scan_dir(store, &filter).map_err(store_failure)?;
    if events.is_empty() {
        return Err(findings(format!("trace {trace} not found in {}", store.display())));
    }
    let assembly = assemble(&events).map_err(|e| findings(format!("trace {trace}: {e}")))?;
    out.write_all(render_tree(&assembly.tree).as_bytes())
        .map_err(|e| env_err(format!("cannot write output: {e}")))?;
    for a in &assembly.anomalies {
        eprintln!("anomaly: {} span {} event {}", a.kind.as_str(), a.span_id, a.event_id);
    }
    if !assembly.tree.unanchored.is_empty() {
        eprintln!("{} event(s) not attached to any span", assembly.tree.unanchored.len());
    }
    Ok(EXIT_OK)
}

pub fn cmd_stats(store: &Path, args: &StatsArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let ts = |s: &Option<String>| -> Result<Option<Timestamp>, Failure> {
        s.as_deref()
            .map(|t| t.parse().map_err(|e| env_err(format!("invalid timestamp {t:?}: {e}"))))
            .transpose()
    };
    let filter = Filter {
        trace_id: args.trace.as_deref().map(parse_trace).transpose()?,
        agent: args.agent.clone(),
        surface: args
            .surface
            .as_deref()
            .map(|s| Surface::parse(s).ok_or_else(|| env_err(format!("unknown surface {s:?}"))))
            .transpose()?,
        since: ts(&args.since)?,
        until: ts(&args.until)?,
    };
    let events = scan_dir(store, &filter).map_err(store_failure)?;
    let mut total = StatsSummary::default();
    for (trace, events) in partition_by_trace(&events) {
        let assembly = assemble(&events).map_err(|e| findings(format!("trace {trace}: {e}")))?;
        total.merge(&trace_stats(&assembly.tree));
    }
    emit(out, &total.to_json())?;
    Ok(EXIT_OK)
}

fn sha256_hex(s: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// One output record of `extract`.
pub fn extraction_line(name: &str, text: &str) -> String {
    let (cleaned, payload) = maybe_extract_cognitive(text);
    let strategy = payload.as_ref().map_or("none", |p| p.strategy.as_str());
    let field = |f: fn(&CognitivePayload) -> &Option<String>| payload.as_ref().and_then(|p| f(p).as_deref());
    let mut out = String::new();
    let mut w = ObjectWriter::new(&mut out);
    w.str("file", name)
        .str("strategy", strategy)
        .opt_str("thought", field(|p| &p.thought))
        .opt_str("plan", field(|p| &p.plan))
        .opt_str("reflection", field(|p| &p.reflection))
        .str("cleaned", &cleaned)
        .str("cleaned_sha256", &sha256_hex(&cleaned))
        .raw("source_offsets", |o| {
            o.push('[');
            let offsets = payload.as_ref().map_or(&[][..], |p| &p.source_offsets[..]);
            for (i, (s, e)) in offsets.iter().enumerate() {
                if i > 0 {
                    o.push(',');
                }
                o.push_str(&format!("[{s},{e}]"));
            }
            o.push(']');
        });
    w.finish();
    out
}

/// A directory means its `*.txt` files in name order, one completion each; a
/// `.jsonl` file holds one JSON string per line; anything else is a single
/// completion.
pub fn cmd_extract(path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| env_err(format!("cannot read {}: {e}", p.display())));
    let mut code = EXIT_OK;
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| env_err(format!("cannot list {}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        for f in files {
            let name = f.file_name().unwrap_or_default().to_string_lossy().into_owned();
            emit(out, &extraction_line(&name, &read(&f)?))?;
        }
    } else if path.extension().is_some_and(|x| x == "jsonl") {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for (i, line) in read(path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<String>(line) {
                Ok(text) => emit(out, &extraction_line(&format!("{name}:{}", i + 1), &text))?,
                Err(e) => {
                    eprintln!("{name}:{}: not a JSON string: {e}", i + 1);
                    code = EXIT_FINDINGS;
                }
            }
        }
    } else {
        let text = read(path)?;
        if !text.is_empty() {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            emit(out, &extraction_line(&name, &text))?;
        }
    }
    Ok(code)
}

fn register_signals(flag: &Arc<AtomicBool>) -> Result<(), Failure> {
    for sig in [signal_hook::consts::SIGTERM, signal_hook::consts::SIGINT] {
        signal_hook::flag::register(sig, flag.clone()).map_err(|e| env_err(format!("cannot install signal handler: {e}")))?;
    }
    Ok(())
}

fn cmd_serve(settings: &Settings, out: &mut dyn Write) -> Result<i32, Failure> {
    let stop = Arc::new(AtomicBool::new(false));
    register_signals(&stop)?;

    let store = open_store(settings)?;
    let exporter = Exporter::start_http(settings.exporter.clone()).map_err(|e| env_err(e.to_string()))?;
    let live = Arc::new(Mutex::new(Some(LiveExport::new(exporter, settings.mirror_path()))));
    let hook: AppendHook = {
        let live = live.clone();
        Box::new(move |event| {
            if let Some(l) = live.lock().unwrap().as_mut() {
                l.observe(event);
            }
        })
    };
    let appender = Appender::start(
        store,
        settings.ingest_queue,
        Duration::from_millis(settings.store_flush_ms.max(1)),
        Some(hook),
    );

    let listeners = StreamServer::bind(settings.stream_listen.as_str(), appender.handle()).and_then(|stream| {
        HttpServer::bind(&settings.http_listen, appender.handle(), settings.max_body_bytes).map(|http| (stream, http))
    });
    let (stream, http) = match listeners {
        Ok(pair) => pair,
        Err(e) => {
            drop(appender.finish());
            if let Some(l) = live.lock().unwrap().take() {
                l.finish();
            }
            return Err(env_err(e.to_string()));
        }
    };

    let mut ready = String::new();
    let mut w = ObjectWriter::new(&mut ready);
    w.display("stream", stream.local_addr()).display("http", http.local_addr());
    w.finish();
    emit(out, &ready)?;
    let _ = out.flush();
    tracing::info!(stream = %stream.local_addr(), http = %http.local_addr(), store = %settings.store.display(), "serving");

    while !stop.load(Ordering::Acquire) {
        std::thread::sleep(Duration::from_millis(50));
    }
    tracing::info!("shutting down");

    let mut ingest = IngestReport::default();
    for (_, r) in stream.shutdown() {
        ingest.merge(&r);
    }
    ingest.merge(&http.shutdown());
    let store = appender.finish();
    let stored = store.len();
    drop(store);
    let outcome = match live.lock().unwrap().take() {
        Some(l) => l.finish(),
        None => Default::default(),
    };

    let mut summary = String::new();
    let mut w = ObjectWriter::new(&mut summary);
    w.raw("ingest", |o| o.push_str(&ingest.to_json()))
        .int("stored_events", stored)
        .raw("export", |o| {
            let mut e = ObjectWriter::new(o);
            e.int("enqueued", outcome.enqueued)
                .int("delivered", outcome.delivered)
                .int("degraded", outcome.degraded)
                .int("lost", outcome.lost);
            e.finish();
        });
    w.finish();
    emit(out, &summary)?;
    Ok(EXIT_OK)
}
