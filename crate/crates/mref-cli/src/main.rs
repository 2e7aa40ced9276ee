//! `mref` is the command-line front door: compile CSV procedures to wire files,
//! simulate uplink transfers, run full scenarios on the virtual clock, and
//! summarize bandwidth usage.
//!
//! Exit codes: 0 success, 1 usage, 2 parse/compile, 3 validation, 4 I/O.

use std::env;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mref_core::authoring;
use mref_core::catalog::AssetCatalog;
use mref_core::instructions::{self, AssetRef};
use mref_core::link::{self, bandwidth_stats_from, Link, LinkConfig, Message, MessageKind};
use mref_core::scenario::{self, ScenarioError};
use mref_core::wire;

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_IO: u8 = 4;

/// Seconds of transmission time accepted as a reasonable uplink window.
const SEND_WINDOW_LIMIT_S: f64 = 300.0;

#[derive(Parser)]
#[command(
    name = "mref",
    version,
    about = "Model-referential instruction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a CSV procedure into a `.mri` wire document
    Compile {
        /// Input CSV file
        csv: PathBuf,
        /// Asset catalog to validate against
        #[arg(long)]
        catalog: PathBuf,
        /// Asset id of the tracked target object
        #[arg(long)]
        target_asset: String,
        /// Instruction set id (defaults to the CSV file stem)
        #[arg(long)]
        set_id: Option<String>,
        /// Output wire file
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Simulate one wire file crossing a link
    Send {
        /// Input `.mri` wire file
        mri: PathBuf,
        /// Link preset: lunar or mars
        #[arg(long, conflicts_with_all = ["delay", "rate"])]
        preset: Option<String>,
        /// One-way propagation delay in seconds
        #[arg(long, requires = "rate")]
        delay: Option<f64>,
        /// Data rate in bytes per second
        #[arg(long, requires = "delay")]
        rate: Option<f64>,
    },
    /// Run a scenario script and write its logs
    Run {
        /// Scenario file
        scenario: PathBuf,
        /// Output directory for the logs
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize bandwidth usage from a run's delivery log
    Report {
        /// Directory containing deliveries.log
        dir: PathBuf,
        /// Stats window in seconds
        #[arg(long, default_value_t = scenario::REPORT_WINDOW_S)]
        window: f64,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
    fn parse(message: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_PARSE,
            message: message.to_string(),
        }
    }
    fn validation(message: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.to_string(),
        }
    }
    fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compile {
            csv,
            catalog,
            target_asset,
            set_id,
            out,
        } => cmd_compile(&csv, &catalog, &target_asset, set_id.as_deref(), &out),
        Command::Send {
            mri,
            preset,
            delay,
            rate,
        } => cmd_send(&mri, preset.as_deref(), delay, rate),
        Command::Run { scenario, out } => cmd_run(&scenario, &out),
        Command::Report { dir, window } => cmd_report(&dir, window),
    }
}

/// Input paths that do not exist are retried under `$MREF_FIXTURES`.
fn resolve_input(path: &Path) -> PathBuf {
    if path.exists() || !path.is_relative() {
        return path.to_path_buf();
    }
    if let Ok(root) = env::var("MREF_FIXTURES") {
        let candidate = Path::new(&root).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn size_report_line(set_id: &str, report: &wire::SizeReport) -> String {
    format!(
        "sizereport set={} wire_bytes={} asset_bytes={} ratio={:.6}",
        set_id, report.wire_bytes, report.referenced_asset_bytes, report.reduction_ratio
    )
}

fn cmd_compile(
    csv: &Path,
    catalog_path: &Path,
    target_asset: &str,
    set_id: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let csv = resolve_input(csv);
    let catalog_path = resolve_input(catalog_path);

    let target =
        AssetRef::new(target_asset).map_err(|e| CliError::usage(format!("--target-asset: {e}")))?;
    let set_id = match set_id {
        Some(id) if !id.is_empty() => id.to_string(),
        Some(_) => return Err(CliError::usage("--set-id must be non-empty")),
        None => csv
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .ok_or_else(|| {
                CliError::usage("cannot derive a set id from the CSV path; pass --set-id")
            })?,
    };

    let csv_text = read_text(&csv)?;
    let catalog = AssetCatalog::parse(&read_text(&catalog_path)?)
        .map_err(|e| CliError::parse(format!("{}: {e}", catalog_path.display())))?;

    let set = match authoring::compile_csv(&csv_text, &set_id, target) {
        Ok(set) => set,
        Err(errors) => {
            for e in &errors {
                eprintln!("{}: {e}", csv.display());
            }
            return Err(CliError::parse(format!(
                "{} compile diagnostics",
                errors.len()
            )));
        }
    };

    let report = instructions::validate(&set, &catalog);
    if !report.ok() {
        for issue in &report.issues {
            eprintln!("{}: {issue}", csv.display());
        }
        return Err(CliError::validation(format!(
            "{} validation issues",
            report.issues.len()
        )));
    }

    let doc = wire::encode(&set).map_err(|e| CliError::parse(e.to_string()))?;
    let size = wire::size_report(&set, &catalog).map_err(|e| CliError::parse(e.to_string()))?;
    fs::write(out, doc.as_bytes()).map_err(|e| CliError::io(out, e))?;

    let cues: usize = set.steps.iter().map(|s| s.cues.len()).sum();
    let keyframes: usize = set
        .steps
        .iter()
        .flat_map(|s| &s.cues)
        .map(|c| c.track.keyframes.len())
        .sum();
    println!(
        "compiled set={} steps={} cues={} keyframes={}",
        set.set_id,
        set.steps.len(),
        cues,
        keyframes
    );
    println!("wrote {}", out.display());
    println!("{}", size_report_line(&set.set_id, &size));
    Ok(())
}

fn link_config_from_flags(
    preset: Option<&str>,
    delay: Option<f64>,
    rate: Option<f64>,
) -> Result<LinkConfig, CliError> {
    match (preset, delay, rate) {
        (Some("lunar"), None, None) => Ok(LinkConfig::lunar()),
        (Some("mars"), None, None) => Ok(LinkConfig::mars()),
        (Some(other), None, None) => Err(CliError::usage(format!(
            "unknown preset `{other}` (expected lunar or mars)"
        ))),
        (None, Some(delay), Some(rate)) => {
            LinkConfig::new("custom", delay, rate).map_err(CliError::usage)
        }
        _ => Err(CliError::usage(
            "pass either --preset or both --delay and --rate",
        )),
    }
}

fn cmd_send(
    mri: &Path,
    preset: Option<&str>,
    delay: Option<f64>,
    rate: Option<f64>,
) -> Result<(), CliError> {
    let config = link_config_from_flags(preset, delay, rate)?;
    let mri = resolve_input(mri);
    let bytes = fs::read(&mri).map_err(|e| CliError::io(&mri, e))?;
    let set =
        wire::decode(&bytes).map_err(|e| CliError::parse(format!("{}: {e}", mri.display())))?;

    let mut link = Link::new(config.clone());
    link.submit(
        Message {
            id: 1,
            payload_bytes: bytes.len() as u64,
            kind: MessageKind::InstructionSet,
        },
        0.0,
    )
    .expect("fresh link accepts t=0");
    let t_done = link.next_delivery().expect("one message pending");
    let tx = link.run_until(t_done).expect("clock is monotone")[0];

    let transmission = tx.t_tx_end - tx.t_tx_start;
    let verdict = if transmission <= SEND_WINDOW_LIMIT_S {
        "WITHIN"
    } else {
        "EXCEEDS"
    };
    println!(
        "send file={} set={} bytes={} link={} rate={} delay_s={:.6}",
        mri.display(),
        set.set_id,
        bytes.len(),
        config.name,
        config.data_rate_bps,
        config.one_way_delay_s
    );
    println!("submit t={:.6}", tx.t_submit);
    println!("tx_start t={:.6}", tx.t_tx_start);
    println!("tx_end t={:.6}", tx.t_tx_end);
    println!("transmission_s {:.6}", transmission);
    println!("propagation_s {:.6}", config.one_way_delay_s);
    println!("delivered t={:.6}", tx.t_delivered);
    println!(
        "window transmission_s={:.6} limit_s={:.6} verdict={}",
        transmission, SEND_WINDOW_LIMIT_S, verdict
    );
    Ok(())
}

fn scenario_error(e: ScenarioError, scenario_path: &Path) -> CliError {
    match e {
        ScenarioError::Parse(e) => CliError::parse(format!("{}: {e}", scenario_path.display())),
        ScenarioError::Io { path, message } => CliError {
            code: EXIT_IO,
            message: format!("{path}: {message}"),
        },
        ScenarioError::Catalog(e) => CliError::parse(e),
        ScenarioError::Channels(e) => CliError::parse(e),
        ScenarioError::Wire { path, source } => CliError::parse(format!("{path}: {source}")),
        e @ ScenarioError::SetValidation { .. } => CliError::validation(e),
        e @ ScenarioError::UnknownChannel(_) => CliError::validation(e),
        ScenarioError::Link(e) => CliError::parse(e),
    }
}

fn cmd_run(scenario_path: &Path, out: &Path) -> Result<(), CliError> {
    let scenario_path = resolve_input(scenario_path);
    let text = read_text(&scenario_path)?;
    let script = scenario::parse(&text)
        .map_err(|e| CliError::parse(format!("{}: {e}", scenario_path.display())))?;
    let base = scenario_path.parent().unwrap_or_else(|| Path::new("."));
    let loaded = scenario::load(&script, base).map_err(|e| scenario_error(e, &scenario_path))?;
    let report = scenario::run(&loaded);

    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (name, content) in [
        ("deliveries.log", &report.delivery_log),
        ("alerts.log", &report.alert_log),
        ("effects.log", &report.effect_log),
        ("report.txt", &report.report),
    ] {
        let path = out.join(name);
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
    }
    for dir in &report.dirs {
        let path = out.join(dir);
        fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
    }
    for (rel, content) in &report.files {
        let path = out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
    }

    println!(
        "run ok events={} deliveries={} alerts={} effects={} out={}",
        loaded.events.len(),
        report.delivery_log.lines().count(),
        report.alert_log.lines().count(),
        report.effect_log.lines().count(),
        out.display()
    );
    Ok(())
}

fn cmd_report(dir: &Path, window: f64) -> Result<(), CliError> {
    let dir = resolve_input(dir);
    let log_path = dir.join("deliveries.log");
    let text = read_text(&log_path)?;

    let mut uplink: Vec<(f64, u64)> = Vec::new();
    let mut downlink: Vec<(f64, u64)> = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let (t, _id, kind, bytes) = link::parse_delivery_log_line(line)
            .map_err(|e| CliError::parse(format!("{}: {e}", log_path.display())))?;
        match kind {
            MessageKind::InstructionSet => uplink.push((t, bytes)),
            _ => downlink.push((t, bytes)),
        }
    }

    println!("report dir={} window_s={:.6}", dir.display(), window);
    if uplink.is_empty() && downlink.is_empty() {
        println!("NO_TRAFFIC");
        return Ok(());
    }
    for (name, deliveries) in [("uplink", uplink), ("downlink", downlink)] {
        if deliveries.is_empty() {
            println!("{name} NO_TRAFFIC");
            continue;
        }
        let t0 = deliveries
            .iter()
            .map(|(t, _)| *t)
            .fold(f64::INFINITY, f64::min);
        let stats = bandwidth_stats_from(t0, &deliveries, window)
            .map_err(|e| CliError::usage(format!("--window: {e}")))?;
        println!(
            "{name} total_bytes={} average_bps={:.6} peak_bps={:.6}",
            stats.total_bytes, stats.average_bps, stats.peak_window_bps
        );
    }
    Ok(())
}
