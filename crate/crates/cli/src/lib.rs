//! Operator commands behind the `footprint` binary.

use std::fmt::Write as _;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use footprint_core::geo::{DayAnalysis, GeoParams};
use footprint_core::ingest::IngestError;
use footprint_core::pipeline::{render_summary, PipelineError, PipelineParams};
use footprint_core::reconstruction::{export_episodes, ExportFormat};
use footprint_core::timeline::DEFAULT_VISUAL_GAP_S;
use footprint_core::Timeline;
use footprint_service::{ingest_loaded, load_manifest, AppState, IngestFailure, IngestSummary, LoadError, Store, StoreError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_EMPTY_DAY: i32 = 3;
pub const EXIT_UNKNOWN: i32 = 4;
pub const EXIT_BIND: i32 = 5;
pub const EXIT_WRITE: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "footprint", version, about = "Lifelog day ingestion, review service and export")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a day manifest, analyse it and persist the results.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        store: StoreArg,
        /// Replace a day that was already ingested.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Print a text rendering of an ingested day.
    Summarize {
        #[arg(long)]
        date: NaiveDate,
        #[command(flatten)]
        store: StoreArg,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long, env = "BIND_ADDR", default_value = "127.0.0.1:8080")]
        bind: String,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Write the episodes of a reconstruction session.
    Export {
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        session: String,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
        /// Destination file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        store: StoreArg,
    },
}

#[derive(Debug, Args)]
pub struct StoreArg {
    #[arg(long = "store", env = "STORE_ROOT", default_value = "store")]
    pub root: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, env = "RADIUS_M", default_value_t = GeoParams::default().radius_m)]
    pub radius_m: f64,
    #[arg(long, env = "MIN_DWELL_S", default_value_t = GeoParams::default().min_dwell_s)]
    pub min_dwell_s: f64,
    #[arg(long, env = "MERGE_RADIUS_M", default_value_t = GeoParams::default().merge_radius_m)]
    pub merge_radius_m: f64,
    #[arg(long, env = "VISUAL_GAP_S", default_value_t = DEFAULT_VISUAL_GAP_S)]
    pub visual_gap_s: f64,
}

impl ParamArgs {
    pub fn params(&self) -> Result<PipelineParams, String> {
        let geo = GeoParams {
            radius_m: self.radius_m,
            min_dwell_s: self.min_dwell_s,
            merge_radius_m: self.merge_radius_m,
            ..GeoParams::default()
        };
        geo.validate().map_err(|e| e.to_string())?;
        if !(self.visual_gap_s.is_finite() && self.visual_gap_s > 0.0) {
            return Err(format!("visual_gap_s must be positive, got {}", self.visual_gap_s));
        }
        Ok(PipelineParams { geo, visual_gap_s: self.visual_gap_s })
    }
}

/// Command failure carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Failure { code, message: message.to_string() }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::AlreadyIngested(_) => EXIT_FAILURE,
            StoreError::UnknownDay(_) | StoreError::UnknownSession(_) => EXIT_UNKNOWN,
            StoreError::Io(_) => EXIT_WRITE,
            StoreError::Corrupt { .. } => EXIT_FAILURE,
        };
        Failure::new(code, e)
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::new(EXIT_PARSE, e)
    }
}

impl From<IngestFailure> for Failure {
    fn from(e: IngestFailure) -> Self {
        match e {
            IngestFailure::Store(e) => e.into(),
            IngestFailure::Pipeline(PipelineError::Ingest(IngestError::EmptyDay)) => Failure::new(EXIT_EMPTY_DAY, "no samples in any channel"),
            IngestFailure::Pipeline(e @ (PipelineError::Parse { .. } | PipelineError::Ingest(_))) => Failure::new(EXIT_PARSE, e),
            IngestFailure::Pipeline(e) => Failure::new(EXIT_FAILURE, e),
        }
    }
}

pub fn format_ingest(summary: &IngestSummary) -> String {
    let c = &summary.counts;
    let mut out = String::new();
    let rows = [
        ("fixes", c.fixes),
        ("images", c.images),
        ("events", c.events),
        ("stay points", c.stay_points),
        ("places", c.places),
        ("transitions", c.transitions),
    ];
    let _ = writeln!(out, "ingested {}", summary.date);
    for (name, n) in rows {
        let _ = writeln!(out, "  {name:<12} {n:>6}");
    }
    for w in &summary.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn cmd_ingest(manifest: &Path, root: &Path, force: bool, params: &PipelineParams) -> Result<String, Failure> {
    let loaded = load_manifest(manifest)?;
    let store = Store::open(root)?;
    let summary = ingest_loaded(&store, &loaded, params, force)?;
    Ok(format_ingest(&summary))
}

pub fn cmd_summarize(date: NaiveDate, root: &Path) -> Result<String, Failure> {
    let store = Store::open(root)?;
    let day = store.daylog(date)?;
    let analysis: DayAnalysis = store.read_doc(date, "analysis.json")?;
    let timeline: Timeline = store.read_doc(date, "timeline.json")?;
    Ok(render_summary(&day, &analysis, &timeline))
}

pub fn cmd_export(date: NaiveDate, session: &str, format: ExportFormat, out: Option<&Path>, root: &Path) -> Result<String, Failure> {
    let store = Store::open(root)?;
    let session = store.load_session(date, session)?;
    let text = export_episodes(&session, format);
    match out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| Failure::new(EXIT_WRITE, format!("cannot write {}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

async fn shutdown_signal() {
    let interrupt = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("signal handler");
        tokio::select! {
            _ = interrupt => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = interrupt.await;
}

pub fn cmd_serve(root: &Path, bind: &str, params: PipelineParams) -> Result<(), Failure> {
    let store = Store::open(root)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(EXIT_FAILURE, e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| Failure::new(EXIT_BIND, format!("cannot bind {bind}: {e}")))?;
        let addr: SocketAddr = listener.local_addr().map_err(|e| Failure::new(EXIT_BIND, e))?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        footprint_service::serve(listener, AppState::new(store, params), shutdown_signal())
            .await
            .map_err(|e| Failure::new(EXIT_FAILURE, e))?;
        tracing::info!("shut down");
        Ok(())
    })
}

/// Runs a parsed command line, printing output and returning the exit status.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Ingest { manifest, store, force, params } => {
            params.params().map_err(|e| Failure::new(EXIT_FAILURE, e)).and_then(|p| cmd_ingest(&manifest, &store.root, force, &p))
        }
        Command::Summarize { date, store } => cmd_summarize(date, &store.root),
        Command::Export { date, session, format, out, store } => cmd_export(date, &session, format, out.as_deref(), &store.root),
        Command::Serve { store, bind, params } => {
            let _ = tracing_subscriber::fmt()
                .with_writer(std::io::stderr)
                .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
                .try_init();
            params.params().map_err(|e| Failure::new(EXIT_FAILURE, e)).and_then(|p| cmd_serve(&store.root, &bind, p)).map(|_| String::new())
        }
    };
    match result {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
