//! Telemetry range monitoring: classifies incoming samples against nominal
//! ranges, raises edge-triggered alerts at two severities, and keeps the
//! always-on consumables display state current.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Critical,
    Caution,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "CRITICAL",
            Severity::Caution => "CAUTION",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Nominal range and display policy for one telemetry channel. The range is
/// inclusive on both ends: a value exactly at a bound is nominal.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub name: String,
    pub unit: String,
    pub nominal_min: f64,
    pub nominal_max: f64,
    pub severity: Severity,
    pub always_display: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TelemetryError {
    #[error("nominal_min must be <= nominal_max and neither may be NaN")]
    BadRange,
    #[error("channel `{0}` is configured twice")]
    DuplicateChannel(String),
    #[error("sample for unconfigured channel `{0}`")]
    UnknownChannel(String),
    #[error("channel `{channel}`: sample at t={t} precedes the last sample at t={last}")]
    TimeRegression { channel: String, t: f64, last: f64 },
    #[error("channel `{channel}`: sample value {value} is not finite")]
    NonFiniteValue { channel: String, value: f64 },
}

impl ChannelSpec {
    pub fn new(
        name: &str,
        unit: &str,
        nominal_min: f64,
        nominal_max: f64,
        severity: Severity,
        always_display: bool,
    ) -> Result<Self, TelemetryError> {
        if nominal_min.is_nan() || nominal_max.is_nan() || nominal_min > nominal_max {
            return Err(TelemetryError::BadRange);
        }
        Ok(ChannelSpec {
            name: name.to_string(),
            unit: unit.to_string(),
            nominal_min,
            nominal_max,
            severity,
            always_display,
        })
    }

    /// Alarm iff the value falls outside `[nominal_min, nominal_max]`.
    /// `value` must be finite.
    pub fn classify(&self, value: f64) -> Classification {
        debug_assert!(value.is_finite());
        if value < self.nominal_min || value > self.nominal_max {
            Classification::Alarm
        } else {
            Classification::Nominal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Nominal,
    Alarm,
}

/// One reading on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetrySample {
    pub t: f64,
    pub channel: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlertKind {
    EnterAlarm,
    ExitAlarm,
}

impl AlertKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlertKind::EnterAlarm => "ENTER",
            AlertKind::ExitAlarm => "EXIT",
        }
    }
}

/// Edge-triggered alarm transition. Per channel, ENTER and EXIT strictly
/// alternate starting with ENTER.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertEvent {
    pub t: f64,
    pub channel: String,
    pub kind: AlertKind,
    pub severity: Severity,
    pub value: f64,
}

/// Snapshot of what the heads-up display shows: latest values of the
/// always-displayed channels, channels currently in alarm, and whether the
/// display is flashing (true iff a CRITICAL channel is in alarm).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HudState {
    pub displayed: BTreeMap<String, f64>,
    pub active_warnings: Vec<String>,
    pub flash_red: bool,
}

#[derive(Debug, Clone)]
struct ChannelState {
    last_t: Option<f64>,
    in_alarm: bool,
}

/// Stateful monitor fed one sample at a time by a single logical writer.
#[derive(Debug, Clone)]
pub struct Monitor {
    specs: BTreeMap<String, ChannelSpec>,
    states: BTreeMap<String, ChannelState>,
    displayed: BTreeMap<String, f64>,
}

impl Monitor {
    pub fn new(specs: Vec<ChannelSpec>) -> Result<Self, TelemetryError> {
        let mut map = BTreeMap::new();
        let mut states = BTreeMap::new();
        for spec in specs {
            if map.contains_key(&spec.name) {
                return Err(TelemetryError::DuplicateChannel(spec.name));
            }
            states.insert(
                spec.name.clone(),
                ChannelState {
                    last_t: None,
                    in_alarm: false,
                },
            );
            map.insert(spec.name.clone(), spec);
        }
        Ok(Monitor {
            specs: map,
            states,
            displayed: BTreeMap::new(),
        })
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelSpec> {
        self.specs.get(name)
    }

    /// Folds one sample into the monitor. Emits an event only on a
    /// nominal-to-alarm or alarm-to-nominal transition.
    pub fn ingest(&mut self, sample: &TelemetrySample) -> Result<Vec<AlertEvent>, TelemetryError> {
        let spec = self
            .specs
            .get(&sample.channel)
            .ok_or_else(|| TelemetryError::UnknownChannel(sample.channel.clone()))?;
        if !sample.value.is_finite() {
            return Err(TelemetryError::NonFiniteValue {
                channel: sample.channel.clone(),
                value: sample.value,
            });
        }
        let state = self
            .states
            .get_mut(&sample.channel)
            .expect("state exists for every spec");
        if let Some(last) = state.last_t {
            if sample.t < last {
                return Err(TelemetryError::TimeRegression {
                    channel: sample.channel.clone(),
                    t: sample.t,
                    last,
                });
            }
        }
        state.last_t = Some(sample.t);

        if spec.always_display {
            self.displayed.insert(sample.channel.clone(), sample.value);
        }

        let alarm = spec.classify(sample.value) == Classification::Alarm;
        let mut events = Vec::new();
        if alarm != state.in_alarm {
            state.in_alarm = alarm;
            events.push(AlertEvent {
                t: sample.t,
                channel: sample.channel.clone(),
                kind: if alarm {
                    AlertKind::EnterAlarm
                } else {
                    AlertKind::ExitAlarm
                },
                severity: spec.severity,
                value: sample.value,
            });
        }
        Ok(events)
    }

    pub fn hud_state(&self) -> HudState {
        let active_warnings: Vec<String> = self
            .states
            .iter()
            .filter(|(_, s)| s.in_alarm)
            .map(|(name, _)| name.clone())
            .collect();
        let flash_red = active_warnings
            .iter()
            .any(|name| self.specs[name].severity == Severity::Critical);
        HudState {
            displayed: self.displayed.clone(),
            active_warnings,
            flash_red,
        }
    }
}

/// Parses the channel config format: one channel per line,
///
/// ```text
/// channel <name> unit=<u> min=<real> max=<real> severity=<critical|caution> display=<0|1>
/// ```
///
/// `#` starts a comment. `inf`/`-inf` are accepted as open bounds.
pub fn parse_channel_config(text: &str) -> Result<Vec<ChannelSpec>, TelemetryConfigError> {
    let mut specs: Vec<ChannelSpec> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| TelemetryConfigError {
            line: line_no,
            message,
        };

        let mut parts = line.split_whitespace();
        if parts.next() != Some("channel") {
            return Err(bad("expected `channel <name> ...`".to_string()));
        }
        let name = parts
            .next()
            .ok_or_else(|| bad("missing channel name".to_string()))?;

        let mut unit = None;
        let mut min = None;
        let mut max = None;
        let mut severity = None;
        let mut display = None;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
            match key {
                "unit" => unit = Some(value.to_string()),
                "min" => {
                    min = Some(parse_bound(value).ok_or_else(|| bad(format!("bad min `{value}`")))?)
                }
                "max" => {
                    max = Some(parse_bound(value).ok_or_else(|| bad(format!("bad max `{value}`")))?)
                }
                "severity" => {
                    severity = Some(match value {
                        "critical" => Severity::Critical,
                        "caution" => Severity::Caution,
                        other => {
                            return Err(bad(format!(
                                "severity must be critical or caution, got `{other}`"
                            )))
                        }
                    })
                }
                "display" => {
                    display = Some(match value {
                        "0" => false,
                        "1" => true,
                        other => return Err(bad(format!("display must be 0 or 1, got `{other}`"))),
                    })
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let (unit, min, max, severity, display) = match (unit, min, max, severity, display) {
            (Some(u), Some(mn), Some(mx), Some(sev), Some(d)) => (u, mn, mx, sev, d),
            _ => {
                return Err(bad(
                    "missing one of unit/min/max/severity/display".to_string()
                ))
            }
        };
        if specs.iter().any(|s| s.name == name) {
            return Err(bad(format!("duplicate channel `{name}`")));
        }
        specs.push(
            ChannelSpec::new(name, &unit, min, max, severity, display)
                .map_err(|e| bad(e.to_string()))?,
        );
    }
    Ok(specs)
}

fn parse_bound(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    if v.is_nan() {
        None
    } else {
        Some(v)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct TelemetryConfigError {
    pub line: usize,
    pub message: String,
}

/// Canonical alert log line, six-decimal fixed-point seconds.
pub fn alert_log_line(event: &AlertEvent) -> String {
    format!(
        "alert t={:.6} channel={} kind={} severity={} value={}",
        event.t,
        event.channel,
        event.kind.as_str(),
        event.severity.as_str(),
        event.value
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str, min: f64, max: f64, severity: Severity) -> ChannelSpec {
        ChannelSpec::new(name, "u", min, max, severity, false).unwrap()
    }

    fn sample(t: f64, channel: &str, value: f64) -> TelemetrySample {
        TelemetrySample {
            t,
            channel: channel.to_string(),
            value,
        }
    }

    #[test]
    fn classify_is_inclusive_at_bounds() {
        let s = spec("o2", 20.0, 100.0, Severity::Critical);
        assert_eq!(s.classify(60.0), Classification::Nominal);
        assert_eq!(s.classify(20.0), Classification::Nominal);
        assert_eq!(s.classify(100.0), Classification::Nominal);
        assert_eq!(s.classify(19.9), Classification::Alarm);
        assert_eq!(s.classify(100.1), Classification::Alarm);
    }

    #[test]
    fn in_range_samples_raise_nothing() {
        let mut m = Monitor::new(vec![spec("o2", 20.0, 100.0, Severity::Critical)]).unwrap();
        assert!(m.ingest(&sample(0.0, "o2", 60.0)).unwrap().is_empty());
        assert!(m.ingest(&sample(1.0, "o2", 70.0)).unwrap().is_empty());
    }

    #[test]
    fn edge_triggered_enter_and_exit() {
        // 60, 10, 12, 60: one ENTER at the 10-sample, one EXIT at the final
        // 60, nothing at 12.
        let mut m = Monitor::new(vec![spec("o2", 20.0, 100.0, Severity::Critical)]).unwrap();
        let mut events = Vec::new();
        for (t, v) in [(0.0, 60.0), (1.0, 10.0), (2.0, 12.0), (3.0, 60.0)] {
            events.extend(m.ingest(&sample(t, "o2", v)).unwrap());
        }
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].kind, AlertKind::EnterAlarm);
        assert_eq!(events[0].t, 1.0);
        assert_eq!(events[0].value, 10.0);
        assert_eq!(events[0].severity, Severity::Critical);
        assert_eq!(events[1].kind, AlertKind::ExitAlarm);
        assert_eq!(events[1].t, 3.0);
    }

    #[test]
    fn unknown_channel_is_an_error() {
        let mut m = Monitor::new(vec![spec("o2", 20.0, 100.0, Severity::Critical)]).unwrap();
        assert_eq!(
            m.ingest(&sample(0.0, "flux", 1.0)),
            Err(TelemetryError::UnknownChannel("flux".to_string()))
        );
    }

    #[test]
    fn per_channel_time_must_not_regress() {
        let mut m = Monitor::new(vec![
            spec("a", 0.0, 1.0, Severity::Caution),
            spec("b", 0.0, 1.0, Severity::Caution),
        ])
        .unwrap();
        m.ingest(&sample(5.0, "a", 0.5)).unwrap();
        // Equal timestamps are allowed, other channels are independent.
        assert!(m.ingest(&sample(5.0, "a", 0.5)).is_ok());
        assert!(m.ingest(&sample(1.0, "b", 0.5)).is_ok());
        assert!(matches!(
            m.ingest(&sample(4.0, "a", 0.5)),
            Err(TelemetryError::TimeRegression { .. })
        ));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut m = Monitor::new(vec![spec("o2", 20.0, 100.0, Severity::Critical)]).unwrap();
        assert!(matches!(
            m.ingest(&sample(0.0, "o2", f64::NAN)),
            Err(TelemetryError::NonFiniteValue { .. })
        ));
    }

    #[test]
    fn hud_starts_empty_and_dark() {
        let m = Monitor::new(vec![spec("o2", 20.0, 100.0, Severity::Critical)]).unwrap();
        let hud = m.hud_state();
        assert!(hud.displayed.is_empty());
        assert!(hud.active_warnings.is_empty());
        assert!(!hud.flash_red);
    }

    #[test]
    fn caution_alarm_warns_without_flashing() {
        let mut m = Monitor::new(vec![spec("pressure", 95.0, 105.0, Severity::Caution)]).unwrap();
        m.ingest(&sample(0.0, "pressure", 110.0)).unwrap();
        let hud = m.hud_state();
        assert_eq!(hud.active_warnings, vec!["pressure".to_string()]);
        assert!(!hud.flash_red);
    }

    #[test]
    fn critical_alarm_flashes() {
        let mut m = Monitor::new(vec![spec("o2", 20.0, 100.0, Severity::Critical)]).unwrap();
        m.ingest(&sample(0.0, "o2", 5.0)).unwrap();
        assert!(m.hud_state().flash_red);
        m.ingest(&sample(1.0, "o2", 50.0)).unwrap();
        assert!(!m.hud_state().flash_red);
    }

    #[test]
    fn always_display_channels_track_latest_value() {
        let mut m = Monitor::new(vec![ChannelSpec::new(
            "o2",
            "s",
            1800.0,
            f64::INFINITY,
            Severity::Critical,
            true,
        )
        .unwrap()])
        .unwrap();
        m.ingest(&sample(0.0, "o2", 5000.0)).unwrap();
        m.ingest(&sample(1.0, "o2", 4990.0)).unwrap();
        assert_eq!(m.hud_state().displayed["o2"], 4990.0);
    }

    #[test]
    fn config_parses_channels_and_open_bounds() {
        let text = "# defaults\nchannel o2_time_remaining_s unit=s min=1800 max=inf severity=critical display=1\nchannel env_pressure_kpa unit=kPa min=95 max=105 severity=caution display=0\n";
        let specs = parse_channel_config(text).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].nominal_max, f64::INFINITY);
        assert_eq!(specs[0].severity, Severity::Critical);
        assert!(specs[0].always_display);
        assert_eq!(specs[1].severity, Severity::Caution);
    }

    #[test]
    fn config_rejects_bad_lines() {
        for bad in [
            "channel",
            "channel x unit=s min=5 max=1 severity=critical display=1",
            "channel x unit=s min=a max=10 severity=critical display=1",
            "channel x unit=s min=0 max=10 severity=urgent display=1",
            "channel x unit=s min=0 max=10 severity=critical",
            "channel x unit=s min=0 max=NaN severity=critical display=0",
            "sensor x unit=s min=0 max=10 severity=critical display=0",
            "channel x unit=s min=0 max=10 severity=critical display=1\nchannel x unit=s min=0 max=10 severity=critical display=1",
        ] {
            assert!(parse_channel_config(bad).is_err(), "should reject: {bad}");
        }
    }

    #[test]
    fn alert_line_format_is_stable() {
        let e = AlertEvent {
            t: 25.0,
            channel: "o2_time_remaining_s".to_string(),
            kind: AlertKind::EnterAlarm,
            severity: Severity::Critical,
            value: 900.0,
        };
        assert_eq!(
            alert_log_line(&e),
            "alert t=25.000000 channel=o2_time_remaining_s kind=ENTER severity=CRITICAL value=900"
        );
    }
}
