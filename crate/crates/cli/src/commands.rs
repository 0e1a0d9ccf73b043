//! Subcommand implementations. Output goes to the given writers so the
//! commands can be exercised in-process.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pas_core::evaluation::default_grid;
use pas_core::ingest::{detect_mode, ingest_csv, summarize_by_bedrooms, top_counts, write_listings, CountKey};
use pas_core::pas::write_scored_csv;
use pas_core::pipeline::{build_report, format_report};
use pas_core::synth::synthesize_fixture;
use pas_core::{Listing, RegressorSpec, SchemaMode, Snapshot, TrainOptions};
use serde_json::json;

use crate::server;

#[derive(Debug, Parser)]
#[command(name = "pas", version, about = "Rental price anomaly scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy, Default)]
#[group(multiple = false)]
pub struct ModeFlags {
    /// Input is a scraped CSV (title, address, price, details, listing_by).
    #[arg(long)]
    pub raw: bool,
    /// Input is a cleaned listings CSV as written by `ingest`.
    #[arg(long)]
    pub processed: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a listings CSV and report dropped rows.
    Ingest {
        csv: PathBuf,
        #[command(flatten)]
        mode: ModeFlags,
        /// Cleaned listings CSV; stdout when omitted (the report then goes to stderr).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Grid-search, evaluate, refit and score; writes a snapshot.
    Train {
        listings: PathBuf,
        #[command(flatten)]
        mode: ModeFlags,
        /// `default` or a JSON file holding an array of model specs.
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = pas_core::pas::DEFAULT_Q)]
        q: f64,
        /// Score even when the PAS preconditions fail (recorded in the snapshot).
        #[arg(long)]
        allow_override: bool,
        /// Fixed creation timestamp, for reproducible snapshots.
        #[arg(long)]
        created_unix: Option<u64>,
        #[arg(short, long, default_value = "snapshot.json")]
        out: PathBuf,
    },
    /// Score new listings against a snapshot; writes the scored CSV.
    Score {
        snapshot: PathBuf,
        listings: PathBuf,
        #[command(flatten)]
        mode: ModeFlags,
        /// Scored CSV; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Model comparison, bedroom summary, category totals and extremes.
    Report {
        snapshot: PathBuf,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        json: bool,
    },
    /// Serve the snapshot API and UI assets.
    Serve {
        snapshot: PathBuf,
        /// Defaults to $PAS_PORT, then 8080.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of built UI assets.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Write a synthetic listings CSV with planted mispricings.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// JSON file listing the planted anomalies.
        #[arg(long)]
        anomalies: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Input or model validation failure (exit code 2).
    Core(pas_core::Error),
    /// Bad flag values (exit code 2).
    Usage(String),
    /// Anything else, such as a failed bind (exit code 1).
    Runtime(String),
}

impl From<pas_core::Error> for CliError {
    fn from(e: pas_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(pas_core::Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (name, message) = match self {
            CliError::Core(e) => (e.name().to_string(), e.to_string()),
            CliError::Usage(m) => ("UsageError".to_string(), m.clone()),
            CliError::Runtime(m) => ("RuntimeError".to_string(), m.clone()),
        };
        json!({ "error": name, "message": message })
    }
}

fn resolve_mode(path: &Path, flags: ModeFlags) -> Result<SchemaMode, CliError> {
    if flags.raw {
        return Ok(SchemaMode::Raw);
    }
    if flags.processed {
        return Ok(SchemaMode::Processed);
    }
    let file = File::open(path)
        .map_err(|source| pas_core::Error::FileUnreadable { path: path.to_path_buf(), source })?;
    let mut header = String::new();
    BufReader::new(file).read_line(&mut header)?;
    Ok(detect_mode(&header))
}

fn read_listings(path: &Path, flags: ModeFlags) -> Result<Vec<Listing>, CliError> {
    let mode = resolve_mode(path, flags)?;
    let (listings, _) = ingest_csv(path, mode)?;
    if listings.is_empty() {
        return Err(pas_core::Error::EmptyDataset.into());
    }
    Ok(listings)
}

fn read_grid(arg: &str) -> Result<Vec<RegressorSpec>, CliError> {
    if arg == "default" {
        return Ok(default_grid());
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path)
        .map_err(|source| pas_core::Error::FileUnreadable { path: path.to_path_buf(), source })?;
    let grid: Vec<RegressorSpec> = serde_json::from_str(&text).map_err(pas_core::Error::from)?;
    if grid.is_empty() {
        return Err(pas_core::Error::EmptyGrid.into());
    }
    for spec in &grid {
        spec.validate()?;
    }
    Ok(grid)
}

fn with_output<F>(out: Option<&Path>, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match out {
        Some(path) => {
            let mut file = std::io::BufWriter::new(File::create(path)?);
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { csv, mode, out } => {
            let mode = resolve_mode(&csv, mode)?;
            let (listings, report) = ingest_csv(&csv, mode)?;
            with_output(out.as_deref(), stdout, |w| Ok(write_listings(w, &listings)?))?;
            let summary = json!({
                "rows_read": report.rows_read,
                "rows_kept": report.rows_kept,
                "rows_dropped": report.rows_dropped,
                "baths_imputed": report.baths_imputed,
                "drop_counts": report.drop_counts(),
                "drops": report.drops,
                "bedrooms": if listings.is_empty() { None } else { Some(summarize_by_bedrooms(&listings)?) },
                "top_streets": top_counts(&listings, CountKey::Street, 10).unwrap_or_default(),
                "top_locations": top_counts(&listings, CountKey::Location, 10).unwrap_or_default(),
            });
            let text = serde_json::to_string_pretty(&summary).map_err(pas_core::Error::from)?;
            let sink: &mut dyn Write = if out.is_some() { stdout } else { stderr };
            writeln!(sink, "{text}")?;
        }
        Command::Train { listings, mode, grid, seed, folds, q, allow_override, created_unix, out } => {
            let listings = read_listings(&listings, mode)?;
            let options = TrainOptions {
                grid: read_grid(&grid)?,
                seed,
                folds,
                q,
                allow_override,
                created_unix,
                ..Default::default()
            };
            let outcome = pas_core::train(&listings, &options)?;
            outcome.snapshot.save(&out)?;
            let report = build_report(&outcome.snapshot, None, 5)?;
            write!(stdout, "{}", format_report(&report, Some(&outcome.grid)))?;
            let p = &outcome.snapshot.preconditions;
            writeln!(
                stdout,
                "preconditions: {}{}",
                if p.passed { "passed" } else { "failed" },
                if p.overridden { " (overridden)" } else { "" }
            )?;
            writeln!(stdout, "snapshot written to {}", out.display())?;
        }
        Command::Score { snapshot, listings, mode, out } => {
            let snap = Snapshot::load(&snapshot)?;
            let listings = read_listings(&listings, mode)?;
            let batch = snap.score(&listings)?;
            for u in &batch.unseen {
                let warning = json!({
                    "warning": "UnseenCategory",
                    "listing_id": u.listing_id,
                    "field": u.field,
                    "value": u.value,
                    "encoded_as": snap.schema.baseline_of(&u.field),
                });
                writeln!(stderr, "{warning}")?;
            }
            with_output(out.as_deref(), stdout, |w| Ok(write_scored_csv(w, &batch.records)?))?;
        }
        Command::Report { snapshot, q, top, json } => {
            let snap = Snapshot::load(&snapshot)?;
            let report = build_report(&snap, q, top)?;
            if json {
                let text = serde_json::to_string_pretty(&report).map_err(pas_core::Error::from)?;
                writeln!(stdout, "{text}")?;
            } else {
                write!(stdout, "{}", format_report(&report, None))?;
            }
        }
        Command::Serve { snapshot, port, host, assets } => {
            let snap = Snapshot::load(&snapshot)?;
            let port = server::resolve_port(port).map_err(CliError::Usage)?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid listen address {host}:{port}")))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
            runtime
                .block_on(server::serve(snap, addr, assets, |bound| eprintln!("listening on http://{bound}")))
                .map_err(|e| CliError::Runtime(format!("server failed: {e}")))?;
        }
        Command::Synth { seed, n, out, anomalies } => {
            let data = synthesize_fixture(seed, n);
            with_output(out.as_deref(), stdout, |w| Ok(write_listings(w, &data.listings)?))?;
            if let Some(path) = anomalies {
                let text = serde_json::to_string_pretty(&data.anomalies).map_err(pas_core::Error::from)?;
                fs::write(path, text + "\n")?;
            }
        }
    }
    Ok(())
}
