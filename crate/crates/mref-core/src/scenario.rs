//! End-to-end scenario scripts: a link configuration, a catalog, a channel
//! config, and a timeline of voice, telemetry, and uplink events driven
//! through one virtual clock.
//!
//! Runs are deterministic. Simultaneous items are processed in a fixed order:
//! telemetry, then voice, then uplink submissions, then link deliveries, then
//! photo ticks.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::catalog::{AssetCatalog, CatalogError};
use crate::console::{effect_log_line, Console, ConsoleConfig, Effect, PhraseToken};
use crate::instructions::InstructionSet;
use crate::link::{
    bandwidth_stats, delivery_log_line, Link, LinkConfig, LinkError, Message, MessageKind,
    Transmission,
};
use crate::telemetry::{
    alert_log_line, parse_channel_config, ChannelSpec, Monitor, TelemetryConfigError,
    TelemetrySample,
};
use crate::wire::{self, SizeReport, WireError};

/// Window used for the bandwidth section of run reports.
pub const REPORT_WINDOW_S: f64 = 10.0;

/// One scripted event, before file resolution.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptEventKind {
    Voice(String),
    Telemetry { channel: String, value: f64 },
    Uplink(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEvent {
    pub t: f64,
    pub kind: ScriptEventKind,
}

/// Parsed scenario text: header lines plus the time-sorted event list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub link: LinkConfig,
    pub catalog_path: String,
    pub channels_path: String,
    pub events: Vec<ScriptEvent>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ScenarioParseError {
    pub line: usize,
    pub message: String,
}

/// Parses scenario text. Header lines (`link`, `catalog`, `channels`) must
/// each appear exactly once before any event; `at` event lines must be sorted
/// by nondecreasing time.
pub fn parse(text: &str) -> Result<ScenarioScript, ScenarioParseError> {
    let mut link: Option<LinkConfig> = None;
    let mut catalog_path: Option<String> = None;
    let mut channels_path: Option<String> = None;
    let mut events: Vec<ScriptEvent> = Vec::new();
    let mut last_t: Option<f64> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| ScenarioParseError {
            line: line_no,
            message,
        };

        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match head {
            "link" => {
                if link.is_some() {
                    return Err(bad("duplicate link line".to_string()));
                }
                let mut delay = None;
                let mut rate = None;
                for part in rest.split_whitespace() {
                    let (key, value) = part
                        .split_once('=')
                        .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
                    let parsed: f64 = value
                        .parse()
                        .map_err(|_| bad(format!("bad number `{value}`")))?;
                    match key {
                        "delay" => delay = Some(parsed),
                        "rate" => rate = Some(parsed),
                        other => return Err(bad(format!("unknown link key `{other}`"))),
                    }
                }
                let (delay, rate) = match (delay, rate) {
                    (Some(d), Some(r)) => (d, r),
                    _ => return Err(bad("link line needs delay=<s> and rate=<Bps>".to_string())),
                };
                link =
                    Some(LinkConfig::new("scenario", delay, rate).map_err(|e| bad(e.to_string()))?);
            }
            "catalog" => {
                if catalog_path.is_some() {
                    return Err(bad("duplicate catalog line".to_string()));
                }
                if rest.is_empty() {
                    return Err(bad("catalog line needs a path".to_string()));
                }
                catalog_path = Some(rest.to_string());
            }
            "channels" => {
                if channels_path.is_some() {
                    return Err(bad("duplicate channels line".to_string()));
                }
                if rest.is_empty() {
                    return Err(bad("channels line needs a path".to_string()));
                }
                channels_path = Some(rest.to_string());
            }
            "at" => {
                let (t_str, rest) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| bad("expected `at <t> <kind> ...`".to_string()))?;
                let t: f64 = t_str
                    .parse()
                    .map_err(|_| bad(format!("bad time `{t_str}`")))?;
                if !t.is_finite() || t < 0.0 {
                    return Err(bad(format!("event time must be finite and >= 0, got {t}")));
                }
                if let Some(last) = last_t {
                    if t < last {
                        return Err(bad(format!(
                            "events must be sorted by time ({t} after {last})"
                        )));
                    }
                }
                last_t = Some(t);
                let (kind, rest) = rest
                    .trim()
                    .split_once(char::is_whitespace)
                    .unwrap_or((rest.trim(), ""));
                let rest = rest.trim();
                let kind = match kind {
                    "voice" => {
                        let phrase = rest
                            .strip_prefix('"')
                            .and_then(|s| s.strip_suffix('"'))
                            .ok_or_else(|| bad("voice phrase must be double-quoted".to_string()))?;
                        if phrase.contains('"') {
                            return Err(bad("voice phrase may not contain quotes".to_string()));
                        }
                        if phrase.trim().is_empty() {
                            return Err(bad("voice phrase is empty".to_string()));
                        }
                        ScriptEventKind::Voice(phrase.to_string())
                    }
                    "telemetry" => {
                        let (channel, value_str) =
                            rest.split_once(char::is_whitespace).ok_or_else(|| {
                                bad("expected `telemetry <channel> <value>`".to_string())
                            })?;
                        let value: f64 = value_str.trim().parse().map_err(|_| {
                            bad(format!("bad telemetry value `{}`", value_str.trim()))
                        })?;
                        if !value.is_finite() {
                            return Err(bad("telemetry value must be finite".to_string()));
                        }
                        ScriptEventKind::Telemetry {
                            channel: channel.to_string(),
                            value,
                        }
                    }
                    "uplink" => {
                        if rest.is_empty() {
                            return Err(bad("uplink line needs a path".to_string()));
                        }
                        ScriptEventKind::Uplink(rest.to_string())
                    }
                    other => return Err(bad(format!("unknown event kind `{other}`"))),
                };
                events.push(ScriptEvent { t, kind });
            }
            other => return Err(bad(format!("unknown directive `{other}`"))),
        }
    }

    let link = link.ok_or(ScenarioParseError {
        line: 1,
        message: "missing link line".to_string(),
    })?;
    let catalog_path = catalog_path.ok_or(ScenarioParseError {
        line: 1,
        message: "missing catalog line".to_string(),
    })?;
    let channels_path = channels_path.ok_or(ScenarioParseError {
        line: 1,
        message: "missing channels line".to_string(),
    })?;
    Ok(ScenarioScript {
        link,
        catalog_path,
        channels_path,
        events,
    })
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Parse(#[from] ScenarioParseError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("catalog: {0}")]
    Catalog(#[from] CatalogError),
    #[error("channel config: {0}")]
    Channels(#[from] TelemetryConfigError),
    #[error("{path}: {source}")]
    Wire { path: String, source: WireError },
    #[error("{path}: instruction set failed validation:\n{}", issues.join("\n"))]
    SetValidation { path: String, issues: Vec<String> },
    #[error("telemetry event references unconfigured channel `{0}`")]
    UnknownChannel(String),
    #[error("link: {0}")]
    Link(#[from] LinkError),
}

/// One uplink file, decoded and validated at load time.
#[derive(Debug, Clone)]
pub struct UplinkDoc {
    pub path: String,
    pub wire_len: u64,
    pub set: InstructionSet,
    pub size_report: SizeReport,
}

/// A fully resolved scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub link: LinkConfig,
    pub catalog: AssetCatalog,
    pub channel_specs: Vec<ChannelSpec>,
    pub events: Vec<ScriptEvent>,
    pub uplinks: Vec<UplinkDoc>,
}

fn read_file(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Resolves every path in the script against `base_dir`, loads the catalog and
/// channel config, and decodes and validates every uplinked wire document.
pub fn load(script: &ScenarioScript, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let resolve = |p: &str| -> PathBuf { base_dir.join(p) };

    let catalog = AssetCatalog::parse(&read_file(&resolve(&script.catalog_path))?)?;
    let channel_specs = parse_channel_config(&read_file(&resolve(&script.channels_path))?)?;

    for event in &script.events {
        if let ScriptEventKind::Telemetry { channel, .. } = &event.kind {
            if !channel_specs.iter().any(|s| &s.name == channel) {
                return Err(ScenarioError::UnknownChannel(channel.clone()));
            }
        }
    }

    let mut uplinks = Vec::new();
    for event in &script.events {
        if let ScriptEventKind::Uplink(path) = &event.kind {
            let full = resolve(path);
            let bytes = fs::read(&full).map_err(|e| ScenarioError::Io {
                path: full.display().to_string(),
                message: e.to_string(),
            })?;
            let set = wire::decode(&bytes).map_err(|source| ScenarioError::Wire {
                path: path.clone(),
                source,
            })?;
            let report = crate::instructions::validate(&set, &catalog);
            if !report.ok() {
                return Err(ScenarioError::SetValidation {
                    path: path.clone(),
                    issues: report.issues.iter().map(|i| i.to_string()).collect(),
                });
            }
            let size_report =
                wire::size_report(&set, &catalog).expect("set validated and decodable");
            uplinks.push(UplinkDoc {
                path: path.clone(),
                wire_len: bytes.len() as u64,
                set,
                size_report,
            });
        }
    }

    Ok(Scenario {
        link: script.link.clone(),
        catalog,
        channel_specs,
        events: script.events.clone(),
        uplinks,
    })
}

/// Everything a run produces, in memory. `files` maps relative paths (notes,
/// photo logs) to their full content; `dirs` lists folders opened by the
/// console.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub delivery_log: String,
    pub alert_log: String,
    pub effect_log: String,
    pub report: String,
    pub files: BTreeMap<String, String>,
    pub dirs: BTreeSet<String>,
}

// Tie-break ranks for simultaneous items; photo ticks come after all of these.
const RANK_TELEMETRY: u8 = 0;
const RANK_VOICE: u8 = 1;
const RANK_UPLINK: u8 = 2;
const RANK_DELIVERY: u8 = 3;

fn event_rank(kind: &ScriptEventKind) -> u8 {
    match kind {
        ScriptEventKind::Telemetry { .. } => RANK_TELEMETRY,
        ScriptEventKind::Voice(_) => RANK_VOICE,
        ScriptEventKind::Uplink(_) => RANK_UPLINK,
    }
}

/// Drives the scenario through the virtual clock and renders all logs.
pub fn run(scenario: &Scenario) -> RunReport {
    let mut ordered: Vec<&ScriptEvent> = scenario.events.iter().collect();
    ordered.sort_by(|a, b| {
        a.t.partial_cmp(&b.t)
            .expect("event times are finite")
            .then(event_rank(&a.kind).cmp(&event_rank(&b.kind)))
    });

    let mut uplink = Link::new(scenario.link.clone());
    let mut downlink = Link::new(scenario.link.clone());
    let mut monitor =
        Monitor::new(scenario.channel_specs.clone()).expect("channel config already checked");
    let mut console = Console::new(ConsoleConfig::default());

    // Every photo capture submits a downlink message, whose pending delivery
    // would itself keep the run alive; the horizon stops that cascade at the
    // last scripted event when a scenario never cancels its photo schedule.
    let photo_horizon = ordered.last().map(|e| e.t).unwrap_or(0.0);

    let mut out = RunReport::default();
    for doc in &scenario.uplinks {
        out.report.push_str(&format!(
            "sizereport set={} wire_bytes={} asset_bytes={} ratio={:.6}\n",
            doc.set.set_id,
            doc.size_report.wire_bytes,
            doc.size_report.referenced_asset_bytes,
            doc.size_report.reduction_ratio
        ));
    }

    let mut next_message_id: u64 = 1;
    let mut uplink_doc_by_msg: BTreeMap<u64, usize> = BTreeMap::new();
    let mut next_uplink_doc: usize = 0;
    let mut up_delivered: Vec<Transmission> = Vec::new();
    let mut down_delivered: Vec<Transmission> = Vec::new();
    let mut ev_idx = 0;

    // Effects either hit the logs only or feed files and the downlink.
    fn apply_effects(
        t: f64,
        effects: Vec<Effect>,
        console: &Console,
        downlink: &mut Link,
        next_message_id: &mut u64,
        out: &mut RunReport,
    ) {
        for effect in effects {
            let line_t = match &effect {
                Effect::CapturePhoto { t: boundary, .. } => *boundary,
                _ => t,
            };
            out.effect_log.push_str(&effect_log_line(line_t, &effect));
            out.effect_log.push('\n');
            match effect {
                Effect::OpenFolder(dir) => {
                    out.dirs.insert(dir);
                }
                Effect::AppendNote { path, line } => {
                    let content = out.files.entry(path).or_default();
                    content.push_str(&line);
                    content.push('\n');
                }
                Effect::SendDownlink {
                    kind,
                    payload_bytes,
                } => {
                    let id = *next_message_id;
                    *next_message_id += 1;
                    downlink
                        .submit(
                            Message {
                                id,
                                payload_bytes,
                                kind,
                            },
                            t,
                        )
                        .expect("downlink submits follow the clock");
                }
                Effect::CapturePhoto { seq, t: boundary } => {
                    let meta = format!("photo t={boundary:.6} seq={seq}");
                    if let Some(dir) = console.active_sample_dir() {
                        let content = out.files.entry(format!("{dir}/photos.log")).or_default();
                        content.push_str(&meta);
                        content.push('\n');
                    }
                    let id = *next_message_id;
                    *next_message_id += 1;
                    downlink
                        .submit(
                            Message {
                                id,
                                payload_bytes: meta.len() as u64,
                                kind: MessageKind::PhotoMeta,
                            },
                            boundary,
                        )
                        .expect("photo submits follow the clock");
                }
                Effect::Display(_) | Effect::SchedulePhotos { .. } | Effect::CancelPhotos => {}
            }
        }
    }

    loop {
        // Key: (time, rank, sequence). The lowest key runs next.
        let mut best: Option<(f64, u8, u64)> = None;
        if let Some(event) = ordered.get(ev_idx) {
            best = Some((event.t, event_rank(&event.kind), ev_idx as u64));
        }
        let consider = |best: &mut Option<(f64, u8, u64)>, cand: (f64, u8, u64)| {
            let better = match best {
                None => true,
                Some(cur) => {
                    cand.0 < cur.0 || (cand.0 == cur.0 && (cand.1, cand.2) < (cur.1, cur.2))
                }
            };
            if better {
                *best = Some(cand);
            }
        };
        if let Some(t) = uplink.next_delivery() {
            consider(&mut best, (t, RANK_DELIVERY, 0));
        }
        if let Some(t) = downlink.next_delivery() {
            consider(&mut best, (t, RANK_DELIVERY, 1));
        }
        let Some((t, rank, seq)) = best else {
            break;
        };
        // Photo boundaries fire between other items (never before a
        // simultaneous one, matching their last place in the tie order) and
        // never past the horizon.
        if let Some(boundary) = console.next_photo_boundary() {
            if boundary <= photo_horizon && boundary < t {
                let effects = console.photo_tick(boundary);
                apply_effects(
                    boundary,
                    effects,
                    &console,
                    &mut downlink,
                    &mut next_message_id,
                    &mut out,
                );
                continue;
            }
        }

        match rank {
            RANK_DELIVERY => {
                if seq == 0 {
                    for tx in uplink.run_until(t).expect("clock is monotone") {
                        out.delivery_log.push_str(&delivery_log_line(&tx));
                        out.delivery_log.push('\n');
                        if let Some(doc_idx) = uplink_doc_by_msg.get(&tx.message.id) {
                            console.load_set(&scenario.uplinks[*doc_idx].set);
                        }
                        up_delivered.push(tx);
                    }
                } else {
                    for tx in downlink.run_until(t).expect("clock is monotone") {
                        out.delivery_log.push_str(&delivery_log_line(&tx));
                        out.delivery_log.push('\n');
                        down_delivered.push(tx);
                    }
                }
            }
            _ => {
                let event = ordered[ev_idx];
                ev_idx += 1;
                match &event.kind {
                    ScriptEventKind::Telemetry { channel, value } => {
                        let sample = TelemetrySample {
                            t: event.t,
                            channel: channel.clone(),
                            value: *value,
                        };
                        let alerts = monitor.ingest(&sample).expect("channels checked at load");
                        for alert in alerts {
                            out.alert_log.push_str(&alert_log_line(&alert));
                            out.alert_log.push('\n');
                        }
                    }
                    ScriptEventKind::Voice(phrase) => {
                        let token =
                            PhraseToken::new(phrase, event.t).expect("phrase checked at parse");
                        let effects = console.handle_token(&token);
                        apply_effects(
                            event.t,
                            effects,
                            &console,
                            &mut downlink,
                            &mut next_message_id,
                            &mut out,
                        );
                    }
                    ScriptEventKind::Uplink(_) => {
                        let doc = &scenario.uplinks[next_uplink_doc];
                        let id = next_message_id;
                        next_message_id += 1;
                        uplink
                            .submit(
                                Message {
                                    id,
                                    payload_bytes: doc.wire_len,
                                    kind: MessageKind::InstructionSet,
                                },
                                event.t,
                            )
                            .expect("uplink submits follow the clock");
                        uplink_doc_by_msg.insert(id, next_uplink_doc);
                        next_uplink_doc += 1;
                    }
                }
            }
        }
    }

    for (dir, delivered) in [("uplink", &up_delivered), ("downlink", &down_delivered)] {
        match bandwidth_stats(delivered, REPORT_WINDOW_S) {
            Ok(stats) => out.report.push_str(&format!(
                "bandwidth dir={dir} window_s={:.6} total_bytes={} average_bps={:.6} peak_bps={:.6}\n",
                stats.window_s, stats.total_bytes, stats.average_bps, stats.peak_window_bps
            )),
            Err(LinkError::NoTraffic) => out.report.push_str(&format!("bandwidth dir={dir} NO_TRAFFIC\n")),
            Err(e) => unreachable!("bandwidth stats failed: {e}"),
        }
    }

    out
}
