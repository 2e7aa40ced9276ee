//! Astronaut-side console logic: a key-phrase state machine for instruction
//! navigation and the sampling dialogue, plus the half-second photo capture
//! scheduler. Effects are returned as values; the caller decides what touches
//! disk or the downlink.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::instructions::InstructionSet;
use crate::link::MessageKind;

/// Seconds between scheduled photo captures.
pub const PHOTO_INTERVAL_S: f64 = 0.5;

/// Every key phrase the console reacts to, across all modes.
pub const KEYWORDS: [&str; 8] = [
    "open instructions",
    "begin sampling",
    "next",
    "back",
    "close",
    "collect sample",
    "stop",
    "exit",
];

/// A recognized phrase with the time it was spoken. Text is trimmed and
/// lower-cased on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseToken {
    pub text: String,
    pub t: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("recognized phrase is empty after trimming")]
    Empty,
}

impl PhraseToken {
    pub fn new(raw: &str, t: f64) -> Result<Self, TokenError> {
        let text = raw.trim().to_lowercase();
        if text.is_empty() {
            return Err(TokenError::Empty);
        }
        Ok(PhraseToken { text, t })
    }
}

/// Where the console currently is.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Idle,
    Instructions {
        set_id: String,
        step: usize,
    },
    Sampling {
        sample_id: String,
        question: usize,
    },
    /// Standalone notepad mode; no key phrase in the current grammar reaches
    /// it.
    NoteTaking,
}

/// Observable console state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsoleState {
    pub mode: Mode,
    pub loaded_sets: Vec<String>,
    pub sample_counter: u32,
}

/// Side effects requested by the state machine. Paths are relative and stay
/// inside the session root.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Display(String),
    OpenFolder(String),
    AppendNote {
        path: String,
        line: String,
    },
    SchedulePhotos {
        interval_s: f64,
    },
    CancelPhotos,
    SendDownlink {
        kind: MessageKind,
        payload_bytes: u64,
    },
    CapturePhoto {
        seq: u64,
        t: f64,
    },
}

/// One question answered during sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleAnswer {
    pub question: String,
    pub answer: String,
    pub t: f64,
}

/// Everything recorded for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub created_at: f64,
    pub answers: Vec<SampleAnswer>,
}

impl SampleRecord {
    /// Deterministic notes file content: header line then one line per answer
    /// in temporal order.
    pub fn export_notes(&self) -> String {
        let mut out = format!("sample {} t={:.6}\n", self.sample_id, self.created_at);
        for a in &self.answers {
            out.push_str(&format!("t={:.6} {} :: {}\n", a.t, a.question, a.answer));
        }
        out
    }
}

/// Console configuration: session environment id and the sampling question
/// sequence. Only the color question is fixed by the sampling procedure; the
/// rest of the defaults are placeholders an operator would replace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsoleConfig {
    pub env_id: String,
    pub questions: Vec<String>,
}

impl Default for ConsoleConfig {
    fn default() -> Self {
        ConsoleConfig {
            env_id: "env_1".to_string(),
            questions: vec![
                "What color is the sample?".to_string(),
                "What is the approximate size?".to_string(),
                "Describe the texture.".to_string(),
                "Where was it collected?".to_string(),
            ],
        }
    }
}

/// Relative folder for one sample.
pub fn sample_dir(env_id: &str, sample_id: &str) -> String {
    format!("session/{env_id}/{sample_id}")
}

#[derive(Debug, Clone)]
struct LoadedStep {
    text: String,
    hint: String,
}

#[derive(Debug, Clone, Copy)]
struct PhotoSchedule {
    started_t: f64,
    emitted: u64,
}

/// The key-phrase driven console. One logical owner feeds it tokens and clock
/// ticks; identical input streams produce identical effect traces.
#[derive(Debug, Clone)]
pub struct Console {
    config: ConsoleConfig,
    state: ConsoleState,
    sets: BTreeMap<String, Vec<LoadedStep>>,
    record: Option<SampleRecord>,
    finished: Vec<SampleRecord>,
    photos: Option<PhotoSchedule>,
}

impl Console {
    pub fn new(config: ConsoleConfig) -> Self {
        Console {
            config,
            state: ConsoleState {
                mode: Mode::Idle,
                loaded_sets: Vec::new(),
                sample_counter: 0,
            },
            sets: BTreeMap::new(),
            record: None,
            finished: Vec::new(),
            photos: None,
        }
    }

    pub fn state(&self) -> &ConsoleState {
        &self.state
    }

    /// Records finalized by `collect sample` or `exit`, in completion order.
    pub fn finished_records(&self) -> &[SampleRecord] {
        &self.finished
    }

    /// Makes a delivered instruction set available to `open instructions`.
    /// The most recently loaded set is the one that opens.
    pub fn load_set(&mut self, set: &InstructionSet) {
        let steps = set
            .steps
            .iter()
            .map(|s| LoadedStep {
                text: s.text.clone(),
                hint: s.key_phrase_hint.clone(),
            })
            .collect();
        self.sets.insert(set.set_id.clone(), steps);
        self.state.loaded_sets.retain(|id| id != &set.set_id);
        self.state.loaded_sets.push(set.set_id.clone());
    }

    fn is_keyword(text: &str) -> bool {
        KEYWORDS.contains(&text)
    }

    fn display_step(&self, set_id: &str, step: usize) -> Effect {
        let steps = &self.sets[set_id];
        let s = &steps[step];
        if s.hint.is_empty() {
            Effect::Display(s.text.clone())
        } else {
            Effect::Display(format!("{} [say: {}]", s.text, s.hint))
        }
    }

    fn start_sample(&mut self, t: f64) -> Vec<Effect> {
        self.state.sample_counter += 1;
        let sample_id = format!("sample_{}", self.state.sample_counter);
        let dir = sample_dir(&self.config.env_id, &sample_id);
        let record = SampleRecord {
            sample_id: sample_id.clone(),
            created_at: t,
            answers: Vec::new(),
        };
        let header = format!("sample {sample_id} t={t:.6}");
        self.record = Some(record);
        self.state.mode = Mode::Sampling {
            sample_id,
            question: 0,
        };
        vec![
            Effect::OpenFolder(dir.clone()),
            Effect::AppendNote {
                path: format!("{dir}/notes.txt"),
                line: header,
            },
            Effect::Display(self.config.questions.first().cloned().unwrap_or_default()),
        ]
    }

    fn finalize_sample(&mut self) -> Option<&SampleRecord> {
        let record = self.record.take()?;
        self.finished.push(record);
        self.finished.last()
    }

    /// Feeds one recognized phrase through the grammar. Tokens outside the
    /// grammar (and keywords that mean nothing in the current mode) leave the
    /// state unchanged and produce no effects.
    pub fn handle_token(&mut self, token: &PhraseToken) -> Vec<Effect> {
        match self.state.mode.clone() {
            Mode::Idle => match token.text.as_str() {
                "open instructions" => {
                    let Some(set_id) = self.state.loaded_sets.last().cloned() else {
                        return Vec::new();
                    };
                    self.state.mode = Mode::Instructions {
                        set_id: set_id.clone(),
                        step: 0,
                    };
                    vec![self.display_step(&set_id, 0)]
                }
                "begin sampling" => {
                    let mut effects = self.start_sample(token.t);
                    self.photos = Some(PhotoSchedule {
                        started_t: token.t,
                        emitted: 0,
                    });
                    effects.insert(
                        2,
                        Effect::SchedulePhotos {
                            interval_s: PHOTO_INTERVAL_S,
                        },
                    );
                    effects
                }
                _ => Vec::new(),
            },
            Mode::Instructions { set_id, step } => match token.text.as_str() {
                "next" => {
                    let last = self.sets[&set_id].len() - 1;
                    let step = (step + 1).min(last);
                    self.state.mode = Mode::Instructions {
                        set_id: set_id.clone(),
                        step,
                    };
                    vec![self.display_step(&set_id, step)]
                }
                "back" => {
                    let step = step.saturating_sub(1);
                    self.state.mode = Mode::Instructions {
                        set_id: set_id.clone(),
                        step,
                    };
                    vec![self.display_step(&set_id, step)]
                }
                "close" => {
                    self.state.mode = Mode::Idle;
                    Vec::new()
                }
                _ => Vec::new(),
            },
            Mode::Sampling {
                sample_id,
                question,
            } => match token.text.as_str() {
                "next" => {
                    let last = self.config.questions.len().saturating_sub(1);
                    let question = (question + 1).min(last);
                    self.state.mode = Mode::Sampling {
                        sample_id,
                        question,
                    };
                    match self.config.questions.get(question) {
                        Some(q) => vec![Effect::Display(q.clone())],
                        None => Vec::new(),
                    }
                }
                "collect sample" => {
                    self.finalize_sample();
                    self.start_sample(token.t)
                }
                "stop" => match self.photos.take() {
                    Some(_) => vec![Effect::CancelPhotos],
                    None => Vec::new(),
                },
                "exit" => {
                    let mut effects = Vec::new();
                    if self.photos.take().is_some() {
                        effects.push(Effect::CancelPhotos);
                    }
                    let record = self
                        .finalize_sample()
                        .expect("sampling mode always has a record");
                    effects.push(Effect::SendDownlink {
                        kind: MessageKind::NoteFile,
                        payload_bytes: record.export_notes().len() as u64,
                    });
                    self.state.mode = Mode::Idle;
                    effects
                }
                text if !Self::is_keyword(text) => {
                    let Some(q) = self.config.questions.get(question).cloned() else {
                        return Vec::new();
                    };
                    let record = self
                        .record
                        .as_mut()
                        .expect("sampling mode always has a record");
                    record.answers.push(SampleAnswer {
                        question: q.clone(),
                        answer: token.text.clone(),
                        t: token.t,
                    });
                    let dir = sample_dir(&self.config.env_id, &sample_id);
                    vec![Effect::AppendNote {
                        path: format!("{dir}/notes.txt"),
                        line: format!("t={:.6} {} :: {}", token.t, q, token.text),
                    }]
                }
                _ => Vec::new(),
            },
            Mode::NoteTaking => Vec::new(),
        }
    }

    /// Time of the next unemitted capture boundary, if photos are scheduled.
    pub fn next_photo_boundary(&self) -> Option<f64> {
        self.photos
            .map(|p| p.started_t + (p.emitted + 1) as f64 * PHOTO_INTERVAL_S)
    }

    /// Emits one capture per elapsed interval boundary in `(start, t]`. The
    /// boundary exactly at the schedule start never fires.
    pub fn photo_tick(&mut self, t: f64) -> Vec<Effect> {
        let mut effects = Vec::new();
        let Some(p) = self.photos.as_mut() else {
            return effects;
        };
        loop {
            let boundary = p.started_t + (p.emitted + 1) as f64 * PHOTO_INTERVAL_S;
            if boundary > t {
                break;
            }
            p.emitted += 1;
            effects.push(Effect::CapturePhoto {
                seq: p.emitted,
                t: boundary,
            });
        }
        effects
    }

    /// Folder of the sample currently being worked, when in sampling mode.
    pub fn active_sample_dir(&self) -> Option<String> {
        match &self.state.mode {
            Mode::Sampling { sample_id, .. } => Some(sample_dir(&self.config.env_id, sample_id)),
            _ => None,
        }
    }
}

impl fmt::Display for Effect {
    /// Argument rendering used by the run-log `effect` lines.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Display(text) => write!(f, "DISPLAY \"{text}\""),
            Effect::OpenFolder(path) => write!(f, "OPEN_FOLDER {path}"),
            Effect::AppendNote { path, line } => write!(f, "APPEND_NOTE {path} \"{line}\""),
            Effect::SchedulePhotos { interval_s } => {
                write!(f, "SCHEDULE_PHOTOS interval={interval_s:.6}")
            }
            Effect::CancelPhotos => write!(f, "CANCEL_PHOTOS"),
            Effect::SendDownlink {
                kind,
                payload_bytes,
            } => {
                write!(
                    f,
                    "SEND_DOWNLINK kind={} bytes={payload_bytes}",
                    kind.as_str()
                )
            }
            Effect::CapturePhoto { seq, t } => write!(f, "CAPTURE_PHOTO seq={seq} t={t:.6}"),
        }
    }
}

/// Canonical effect log line.
pub fn effect_log_line(t: f64, effect: &Effect) -> String {
    format!("effect t={t:.6} {effect}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instructions::{AssetRef, InstructionStep};

    fn demo_set() -> InstructionSet {
        InstructionSet {
            set_id: "tire_change".to_string(),
            target_asset: AssetRef::new("rover").unwrap(),
            steps: (0..5)
                .map(|i| InstructionStep {
                    text: format!("Step number {i}"),
                    key_phrase_hint: "next".to_string(),
                    cues: vec![],
                })
                .collect(),
        }
    }

    fn console_with_set() -> Console {
        let mut c = Console::new(ConsoleConfig::default());
        c.load_set(&demo_set());
        c
    }

    fn tok(text: &str, t: f64) -> PhraseToken {
        PhraseToken::new(text, t).unwrap()
    }

    #[test]
    fn token_normalization() {
        let t = PhraseToken::new("  Begin Sampling ", 1.0).unwrap();
        assert_eq!(t.text, "begin sampling");
        assert_eq!(PhraseToken::new("   ", 0.0), Err(TokenError::Empty));
    }

    #[test]
    fn open_instructions_displays_step_zero() {
        let mut c = console_with_set();
        let effects = c.handle_token(&tok("open instructions", 1.0));
        assert_eq!(
            c.state().mode,
            Mode::Instructions {
                set_id: "tire_change".into(),
                step: 0
            }
        );
        assert_eq!(
            effects,
            vec![Effect::Display("Step number 0 [say: next]".to_string())]
        );
    }

    #[test]
    fn open_instructions_without_a_set_is_absorbed() {
        let mut c = Console::new(ConsoleConfig::default());
        let before = c.state().clone();
        assert!(c.handle_token(&tok("open instructions", 1.0)).is_empty());
        assert_eq!(c.state(), &before);
    }

    #[test]
    fn next_and_back_clamp_at_the_ends() {
        let mut c = console_with_set();
        c.handle_token(&tok("open instructions", 0.0));
        c.handle_token(&tok("back", 1.0));
        assert_eq!(
            c.state().mode,
            Mode::Instructions {
                set_id: "tire_change".into(),
                step: 0
            }
        );
        for i in 0..10 {
            c.handle_token(&tok("next", 2.0 + i as f64));
        }
        assert_eq!(
            c.state().mode,
            Mode::Instructions {
                set_id: "tire_change".into(),
                step: 4
            }
        );
        // Clamped at the last step; the display still repeats.
        let effects = c.handle_token(&tok("next", 20.0));
        assert_eq!(effects.len(), 1);
        c.handle_token(&tok("close", 21.0));
        assert_eq!(c.state().mode, Mode::Idle);
    }

    #[test]
    fn unknown_tokens_are_absorbed_everywhere() {
        let mut c = console_with_set();
        for phrase in ["hello there", "scroll", "openinstructions"] {
            let before = c.state().clone();
            assert!(c.handle_token(&tok(phrase, 0.5)).is_empty());
            assert_eq!(c.state(), &before);
        }
        c.handle_token(&tok("open instructions", 1.0));
        let before = c.state().clone();
        assert!(c.handle_token(&tok("collect sample", 2.0)).is_empty());
        assert_eq!(c.state(), &before);
    }

    #[test]
    fn begin_sampling_opens_folder_and_schedules_photos() {
        let mut c = console_with_set();
        let effects = c.handle_token(&tok("begin sampling", 10.0));
        assert_eq!(
            effects,
            vec![
                Effect::OpenFolder("session/env_1/sample_1".to_string()),
                Effect::AppendNote {
                    path: "session/env_1/sample_1/notes.txt".to_string(),
                    line: "sample sample_1 t=10.000000".to_string(),
                },
                Effect::SchedulePhotos { interval_s: 0.5 },
                Effect::Display("What color is the sample?".to_string()),
            ]
        );
        assert_eq!(
            c.state().mode,
            Mode::Sampling {
                sample_id: "sample_1".into(),
                question: 0
            }
        );
    }

    #[test]
    fn sampling_dialogue_records_answers() {
        let mut c = console_with_set();
        c.handle_token(&tok("begin sampling", 10.0));
        let effects = c.handle_token(&tok("gray", 12.5));
        assert_eq!(
            effects,
            vec![Effect::AppendNote {
                path: "session/env_1/sample_1/notes.txt".to_string(),
                line: "t=12.500000 What color is the sample? :: gray".to_string(),
            }]
        );
        // Same question until "next" moves on.
        assert_eq!(
            c.state().mode,
            Mode::Sampling {
                sample_id: "sample_1".into(),
                question: 0
            }
        );
        c.handle_token(&tok("next", 13.0));
        assert_eq!(
            c.state().mode,
            Mode::Sampling {
                sample_id: "sample_1".into(),
                question: 1
            }
        );
    }

    #[test]
    fn exit_downlinks_the_notes_file() {
        let mut c = console_with_set();
        c.handle_token(&tok("begin sampling", 10.0));
        c.handle_token(&tok("gray", 12.5));
        let effects = c.handle_token(&tok("exit", 14.0));
        let record = c.finished_records().last().unwrap();
        let expected =
            "sample sample_1 t=10.000000\nt=12.500000 What color is the sample? :: gray\n";
        assert_eq!(record.export_notes(), expected);
        assert_eq!(
            effects,
            vec![
                Effect::CancelPhotos,
                Effect::SendDownlink {
                    kind: MessageKind::NoteFile,
                    payload_bytes: expected.len() as u64
                },
            ]
        );
        assert_eq!(c.state().mode, Mode::Idle);
    }

    #[test]
    fn collect_sample_starts_the_next_record() {
        let mut c = console_with_set();
        c.handle_token(&tok("begin sampling", 10.0));
        c.handle_token(&tok("gray", 11.0));
        let effects = c.handle_token(&tok("collect sample", 12.0));
        assert_eq!(c.finished_records().len(), 1);
        assert_eq!(
            c.state().mode,
            Mode::Sampling {
                sample_id: "sample_2".into(),
                question: 0
            }
        );
        assert!(effects
            .iter()
            .any(|e| matches!(e, Effect::OpenFolder(p) if p.ends_with("sample_2"))));
        // Photos were already running; no second schedule is issued.
        assert!(!effects
            .iter()
            .any(|e| matches!(e, Effect::SchedulePhotos { .. })));
    }

    #[test]
    fn stop_pauses_photo_capture() {
        let mut c = console_with_set();
        c.handle_token(&tok("begin sampling", 10.0));
        assert_eq!(
            c.handle_token(&tok("stop", 11.0)),
            vec![Effect::CancelPhotos]
        );
        // Second stop has nothing to cancel.
        assert!(c.handle_token(&tok("stop", 12.0)).is_empty());
        assert!(c.photo_tick(20.0).is_empty());
        // Exit after stop downlinks without a second cancel.
        let effects = c.handle_token(&tok("exit", 13.0));
        assert!(matches!(effects.as_slice(), [Effect::SendDownlink { .. }]));
    }

    #[test]
    fn photo_tick_emits_per_elapsed_boundary() {
        let mut c = console_with_set();
        c.handle_token(&tok("begin sampling", 10.0));
        // Tick at exactly the schedule start: the interval is half-open.
        assert!(c.photo_tick(10.0).is_empty());
        let effects = c.photo_tick(11.0);
        assert_eq!(
            effects,
            vec![
                Effect::CapturePhoto { seq: 1, t: 10.5 },
                Effect::CapturePhoto { seq: 2, t: 11.0 },
            ]
        );
        // Boundaries already emitted never fire again.
        assert!(c.photo_tick(11.0).is_empty());
        assert_eq!(
            c.photo_tick(11.6),
            vec![Effect::CapturePhoto { seq: 3, t: 11.5 }]
        );
    }

    #[test]
    fn photo_tick_without_schedule_is_empty() {
        let mut c = console_with_set();
        assert!(c.photo_tick(100.0).is_empty());
    }

    #[test]
    fn replaying_a_token_stream_is_deterministic() {
        let stream = [
            ("open instructions", 1.0),
            ("next", 2.0),
            ("close", 3.0),
            ("begin sampling", 4.0),
            ("gray", 5.0),
            ("next", 6.0),
            ("pebble sized", 7.0),
            ("collect sample", 8.0),
            ("smooth", 9.0),
            ("exit", 10.0),
        ];
        let run = |mut c: Console| {
            let mut trace = Vec::new();
            for (text, t) in stream {
                trace.extend(c.handle_token(&tok(text, t)));
                trace.extend(c.photo_tick(t));
            }
            (c.state().clone(), trace)
        };
        let (s1, t1) = run(console_with_set());
        let (s2, t2) = run(console_with_set());
        assert_eq!(s1, s2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn vocabulary_stays_small() {
        assert!(KEYWORDS.len() <= 25);
    }

    #[test]
    fn export_notes_layout() {
        let record = SampleRecord {
            sample_id: "sample_3".to_string(),
            created_at: 8.25,
            answers: vec![
                SampleAnswer {
                    question: "What color is the sample?".into(),
                    answer: "gray".into(),
                    t: 12.5,
                },
                SampleAnswer {
                    question: "Describe the texture.".into(),
                    answer: "rough".into(),
                    t: 14.0,
                },
            ],
        };
        assert_eq!(
            record.export_notes(),
            "sample sample_3 t=8.250000\nt=12.500000 What color is the sample? :: gray\nt=14.000000 Describe the texture. :: rough\n"
        );
        let empty = SampleRecord {
            sample_id: "s".into(),
            created_at: 0.0,
            answers: vec![],
        };
        assert_eq!(empty.export_notes(), "sample s t=0.000000\n");
    }
}
