//! Deterministic discrete-event model of a one-way deep-space link: a serial
//! store-and-forward channel with a fixed data rate plus a propagation delay.
//! Runs entirely on a virtual clock; nothing here sleeps.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Payload categories moving across the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    InstructionSet,
    NoteFile,
    PhotoMeta,
    TelemetryBatch,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::InstructionSet => "INSTRUCTION_SET",
            MessageKind::NoteFile => "NOTE_FILE",
            MessageKind::PhotoMeta => "PHOTO_META",
            MessageKind::TelemetryBatch => "TELEMETRY_BATCH",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "INSTRUCTION_SET" => Ok(MessageKind::InstructionSet),
            "NOTE_FILE" => Ok(MessageKind::NoteFile),
            "PHOTO_META" => Ok(MessageKind::PhotoMeta),
            "TELEMETRY_BATCH" => Ok(MessageKind::TelemetryBatch),
            other => Err(format!("unknown message kind `{other}`")),
        }
    }
}

/// One message queued for transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub id: u64,
    pub payload_bytes: u64,
    pub kind: MessageKind,
}

/// Channel parameters: one-way propagation delay plus serial data rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub name: String,
    pub one_way_delay_s: f64,
    pub data_rate_bps: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("link delay must be finite and >= 0, rate finite and > 0")]
    BadConfig,
    #[error("submit time {t} precedes the previous submit at {min}")]
    NonMonotonicSubmit { t: f64, min: f64 },
    #[error("clock target {t} precedes current time {now}")]
    NonMonotonicClock { t: f64, now: f64 },
    #[error("message id {0} already submitted on this link")]
    DuplicateMessageId(u64),
    #[error("no delivered traffic to report on")]
    NoTraffic,
    #[error("stats window must be finite and > 0")]
    BadWindow,
}

impl LinkConfig {
    pub fn new(name: &str, one_way_delay_s: f64, data_rate_bps: f64) -> Result<Self, LinkError> {
        if !(one_way_delay_s.is_finite() && one_way_delay_s >= 0.0)
            || !(data_rate_bps.is_finite() && data_rate_bps > 0.0)
        {
            return Err(LinkError::BadConfig);
        }
        Ok(LinkConfig {
            name: name.to_string(),
            one_way_delay_s,
            data_rate_bps,
        })
    }

    /// Cislunar preset: half of the 2.6 s round-trip propagation figure,
    /// paired with the 4000 B/s top of the direct-to-Earth envelope.
    pub fn lunar() -> Self {
        LinkConfig {
            name: "lunar".to_string(),
            one_way_delay_s: 1.3,
            data_rate_bps: 4000.0,
        }
    }

    /// Mars preset: half of a ~22 minute round trip (660 s one way), paired
    /// with the conservative 62.5 B/s bottom of the envelope.
    pub fn mars() -> Self {
        LinkConfig {
            name: "mars".to_string(),
            one_way_delay_s: 660.0,
            data_rate_bps: 62.5,
        }
    }
}

/// Full timeline of one message through the channel.
///
/// Invariants: `t_submit <= t_tx_start <= t_tx_end <= t_delivered`,
/// `t_tx_end - t_tx_start = payload / rate`, `t_delivered = t_tx_end + delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub message: Message,
    pub t_submit: f64,
    pub t_tx_start: f64,
    pub t_tx_end: f64,
    pub t_delivered: f64,
}

/// One simulated link instance. Submissions are FIFO; the transmitter serves
/// one message at a time at the configured rate.
#[derive(Debug, Clone)]
pub struct Link {
    config: LinkConfig,
    now: f64,
    last_submit: f64,
    prev_tx_end: f64,
    pending: VecDeque<Transmission>,
    seen_ids: BTreeSet<u64>,
}

impl Link {
    pub fn new(config: LinkConfig) -> Self {
        Link {
            config,
            now: 0.0,
            last_submit: 0.0,
            prev_tx_end: 0.0,
            pending: VecDeque::new(),
            seen_ids: BTreeSet::new(),
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Queues a message at `t_submit`. Submit times must be nondecreasing and
    /// never precede the current clock; ids are unique per link.
    pub fn submit(&mut self, message: Message, t_submit: f64) -> Result<u64, LinkError> {
        let min = self.last_submit.max(self.now);
        if !t_submit.is_finite() || t_submit < min {
            return Err(LinkError::NonMonotonicSubmit { t: t_submit, min });
        }
        if !self.seen_ids.insert(message.id) {
            return Err(LinkError::DuplicateMessageId(message.id));
        }
        let t_tx_start = t_submit.max(self.prev_tx_end);
        let t_tx_end = t_tx_start + message.payload_bytes as f64 / self.config.data_rate_bps;
        let t_delivered = t_tx_end + self.config.one_way_delay_s;
        self.last_submit = t_submit;
        self.prev_tx_end = t_tx_end;
        self.pending.push_back(Transmission {
            message,
            t_submit,
            t_tx_start,
            t_tx_end,
            t_delivered,
        });
        Ok(message.id)
    }

    /// Advances the clock to `t` and returns every not-yet-reported delivery
    /// with `t_delivered <= t`, ordered by `(t_delivered, id)`.
    pub fn run_until(&mut self, t: f64) -> Result<Vec<Transmission>, LinkError> {
        if !t.is_finite() || t < self.now {
            return Err(LinkError::NonMonotonicClock { t, now: self.now });
        }
        self.now = t;
        let mut delivered = Vec::new();
        while let Some(head) = self.pending.front() {
            if head.t_delivered <= t {
                delivered.push(self.pending.pop_front().expect("head exists"));
            } else {
                break;
            }
        }
        // FIFO already yields nondecreasing delivery times; ids break ties.
        delivered.sort_by(|a, b| {
            a.t_delivered
                .partial_cmp(&b.t_delivered)
                .expect("delivery times are finite")
                .then(a.message.id.cmp(&b.message.id))
        });
        Ok(delivered)
    }

    /// Time of the earliest undelivered message, if any.
    pub fn next_delivery(&self) -> Option<f64> {
        self.pending.front().map(|t| t.t_delivered)
    }
}

/// Windowed throughput summary over a delivery timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthStats {
    pub window_s: f64,
    pub average_bps: f64,
    pub peak_window_bps: f64,
    pub total_bytes: u64,
}

/// Computes stats over transmissions, anchoring the window grid at the first
/// submit time.
pub fn bandwidth_stats(
    events: &[Transmission],
    window_s: f64,
) -> Result<BandwidthStats, LinkError> {
    let t0 = events
        .iter()
        .map(|e| e.t_submit)
        .min_by(|a, b| a.partial_cmp(b).expect("finite times"))
        .ok_or(LinkError::NoTraffic)?;
    let deliveries: Vec<(f64, u64)> = events
        .iter()
        .map(|e| (e.t_delivered, e.message.payload_bytes))
        .collect();
    bandwidth_stats_from(t0, &deliveries, window_s)
}

/// Stats over raw `(t_delivered, bytes)` pairs with an explicit span start.
/// The span is divided into consecutive windows of `window_s` (the last one
/// closed at its right edge); the average is taken over the whole-window span
/// so it can never exceed the peak.
pub fn bandwidth_stats_from(
    t0: f64,
    deliveries: &[(f64, u64)],
    window_s: f64,
) -> Result<BandwidthStats, LinkError> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(LinkError::BadWindow);
    }
    if deliveries.is_empty() {
        return Err(LinkError::NoTraffic);
    }
    let last = deliveries
        .iter()
        .map(|(t, _)| *t)
        .max_by(|a, b| a.partial_cmp(b).expect("finite times"))
        .expect("non-empty");
    let span = (last - t0).max(0.0);
    let window_count = ((span / window_s).ceil() as usize).max(1);

    let mut per_window = vec![0u64; window_count];
    for (t, bytes) in deliveries {
        let idx = (((t - t0) / window_s).floor() as usize).min(window_count - 1);
        per_window[idx] += bytes;
    }
    let total_bytes: u64 = per_window.iter().sum();
    let peak_bytes = per_window.iter().copied().max().expect("non-empty windows");

    Ok(BandwidthStats {
        window_s,
        average_bps: total_bytes as f64 / (window_count as f64 * window_s),
        peak_window_bps: peak_bytes as f64 / window_s,
        total_bytes,
    })
}

/// Canonical delivery log line, six-decimal fixed-point seconds.
pub fn delivery_log_line(tx: &Transmission) -> String {
    format!(
        "deliver t={:.6} id={} kind={} bytes={}",
        tx.t_delivered,
        tx.message.id,
        tx.message.kind.as_str(),
        tx.message.payload_bytes
    )
}

/// Parses one line produced by [`delivery_log_line`].
pub fn parse_delivery_log_line(line: &str) -> Result<(f64, u64, MessageKind, u64), String> {
    let mut t = None;
    let mut id = None;
    let mut kind = None;
    let mut bytes = None;
    let mut parts = line.split_whitespace();
    if parts.next() != Some("deliver") {
        return Err(format!("not a delivery line: `{line}`"));
    }
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("bad field `{part}`"))?;
        match key {
            "t" => t = Some(value.parse::<f64>().map_err(|e| e.to_string())?),
            "id" => id = Some(value.parse::<u64>().map_err(|e| e.to_string())?),
            "kind" => kind = Some(value.parse::<MessageKind>()?),
            "bytes" => bytes = Some(value.parse::<u64>().map_err(|e| e.to_string())?),
            other => return Err(format!("unknown field `{other}`")),
        }
    }
    match (t, id, kind, bytes) {
        (Some(t), Some(id), Some(kind), Some(bytes)) => Ok((t, id, kind, bytes)),
        _ => Err(format!("missing fields in `{line}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(id: u64, bytes: u64) -> Message {
        Message {
            id,
            payload_bytes: bytes,
            kind: MessageKind::InstructionSet,
        }
    }

    #[test]
    fn single_message_timeline() {
        // 12000 B at 4000 B/s is 3.0 s on the wire, plus 1.3 s propagation.
        let mut link = Link::new(LinkConfig::new("lunar", 1.3, 4000.0).unwrap());
        link.submit(msg(1, 12_000), 0.0).unwrap();
        let events = link.run_until(4.3).unwrap();
        assert_eq!(events.len(), 1);
        let tx = events[0];
        assert_eq!(tx.t_tx_start, 0.0);
        assert_eq!(tx.t_tx_end, 3.0);
        assert_eq!(tx.t_delivered, 4.3);
    }

    #[test]
    fn zero_byte_message_only_suffers_propagation() {
        let mut link = Link::new(LinkConfig::new("l", 0.7, 100.0).unwrap());
        link.submit(msg(1, 0), 5.0).unwrap();
        let events = link.run_until(100.0).unwrap();
        assert_eq!(events[0].t_delivered, 5.7);
    }

    #[test]
    fn queued_message_waits_for_the_transmitter() {
        let mut link = Link::new(LinkConfig::new("lunar", 1.3, 4000.0).unwrap());
        link.submit(msg(1, 12_000), 0.0).unwrap();
        link.submit(msg(2, 12_000), 0.0).unwrap();
        let events = link.run_until(10.0).unwrap();
        assert_eq!(events[1].t_tx_start, 3.0);
        assert_eq!(events[1].t_tx_end, 6.0);
        assert_eq!(events[1].t_delivered, 7.3);
    }

    #[test]
    fn run_until_before_delivery_is_empty() {
        let mut link = Link::new(LinkConfig::lunar());
        link.submit(msg(1, 12_000), 0.0).unwrap();
        assert!(link.run_until(4.0).unwrap().is_empty());
        assert_eq!(link.run_until(4.3).unwrap().len(), 1);
        // Already reported; never reported twice.
        assert!(link.run_until(50.0).unwrap().is_empty());
    }

    #[test]
    fn submit_rejects_time_regressions_and_duplicate_ids() {
        let mut link = Link::new(LinkConfig::lunar());
        link.submit(msg(1, 10), 2.0).unwrap();
        assert!(matches!(
            link.submit(msg(2, 10), 1.0),
            Err(LinkError::NonMonotonicSubmit { .. })
        ));
        assert!(matches!(
            link.submit(msg(1, 10), 3.0),
            Err(LinkError::DuplicateMessageId(1))
        ));
        link.run_until(5.0).unwrap();
        assert!(matches!(
            link.submit(msg(3, 10), 4.0),
            Err(LinkError::NonMonotonicSubmit { .. })
        ));
        assert!(matches!(
            link.run_until(1.0),
            Err(LinkError::NonMonotonicClock { .. })
        ));
    }

    #[test]
    fn presets_match_published_figures() {
        let lunar = LinkConfig::lunar();
        assert_eq!(lunar.one_way_delay_s, 1.3);
        assert_eq!(lunar.data_rate_bps, 4000.0);
        let mars = LinkConfig::mars();
        assert_eq!(mars.one_way_delay_s, 660.0);
        assert_eq!(mars.data_rate_bps, 62.5);
    }

    #[test]
    fn stats_single_delivery_in_one_window() {
        let mut link = Link::new(LinkConfig::new("l", 0.1, 4000.0).unwrap());
        link.submit(
            Message {
                id: 1,
                payload_bytes: 286,
                kind: MessageKind::NoteFile,
            },
            0.0,
        )
        .unwrap();
        let events = link.run_until(10.0).unwrap();
        let stats = bandwidth_stats(&events, 1.0).unwrap();
        assert_eq!(stats.peak_window_bps, 286.0);
        assert_eq!(stats.total_bytes, 286);
        assert_eq!(stats.average_bps, 286.0);
    }

    #[test]
    fn stats_average_over_ten_seconds() {
        // 1000 bytes spread over a 10 s span, 10 s window: average 100 B/s.
        let deliveries = [(2.0, 300u64), (6.0, 300u64), (10.0, 400u64)];
        let stats = bandwidth_stats_from(0.0, &deliveries, 10.0).unwrap();
        assert_eq!(stats.average_bps, 100.0);
        assert_eq!(stats.peak_window_bps, 100.0);
    }

    #[test]
    fn stats_average_never_exceeds_peak() {
        let deliveries = [(0.5, 100u64), (1.4, 100u64)];
        let stats = bandwidth_stats_from(0.0, &deliveries, 1.0).unwrap();
        assert!(stats.average_bps <= stats.peak_window_bps);
        assert_eq!(stats.peak_window_bps, 100.0);
    }

    #[test]
    fn stats_reject_empty_and_bad_window() {
        assert_eq!(bandwidth_stats(&[], 1.0), Err(LinkError::NoTraffic));
        assert_eq!(
            bandwidth_stats_from(0.0, &[(1.0, 1)], 0.0),
            Err(LinkError::BadWindow)
        );
    }

    #[test]
    fn delivery_log_line_roundtrips() {
        let tx = Transmission {
            message: Message {
                id: 7,
                payload_bytes: 450,
                kind: MessageKind::PhotoMeta,
            },
            t_submit: 0.0,
            t_tx_start: 0.0,
            t_tx_end: 0.1125,
            t_delivered: 1.4125,
        };
        let line = delivery_log_line(&tx);
        assert_eq!(line, "deliver t=1.412500 id=7 kind=PHOTO_META bytes=450");
        let (t, id, kind, bytes) = parse_delivery_log_line(&line).unwrap();
        assert_eq!((id, kind, bytes), (7, MessageKind::PhotoMeta, 450));
        assert!((t - 1.4125).abs() < 1e-9);
    }
}
