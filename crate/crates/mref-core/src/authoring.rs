//! Compiles operator-authored CSV procedures into validated instruction sets.
//!
//! The format is deliberately flat so it can be written in a spreadsheet: one
//! row per keyframe, rows grouped into cues by `(step_index, cue_index)` and
//! into steps by `step_index`. Compilation is all-or-nothing: either the whole
//! document compiles or every diagnostic is reported with its line number.

use thiserror::Error;

use crate::instructions::{AssetRef, InstructionSet, InstructionStep, ModelCue};
use crate::pose::{Keyframe, KeyframeTrack, Pose, UnitQuaternion, Vec3};

/// Required header line, byte-for-byte.
pub const CSV_HEADER: &str = "step_index,step_text,key_phrase_hint,cue_index,asset_id,highlight,t_offset_s,px,py,pz,qx,qy,qz,qw,sx,sy,sz";

/// Fields per data row.
pub const FIELD_COUNT: usize = 17;

const FIELD_NAMES: [&str; FIELD_COUNT] = [
    "step_index",
    "step_text",
    "key_phrase_hint",
    "cue_index",
    "asset_id",
    "highlight",
    "t_offset_s",
    "px",
    "py",
    "pz",
    "qx",
    "qy",
    "qz",
    "qw",
    "sx",
    "sy",
    "sz",
];

/// One raw data row: the 17 fields in schema order plus its source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvRow {
    pub line: usize,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompileCode {
    BadHeader,
    BadFieldCount,
    BadQuote,
    BadNumber,
    BadStepOrder,
    EmptyText,
    TextMismatch,
    BadCueOrder,
    CueFieldMismatch,
    BadHighlight,
    BadAssetId,
    EmptyDocument,
}

impl CompileCode {
    pub fn as_str(self) -> &'static str {
        match self {
            CompileCode::BadHeader => "BAD_HEADER",
            CompileCode::BadFieldCount => "BAD_FIELD_COUNT",
            CompileCode::BadQuote => "BAD_QUOTE",
            CompileCode::BadNumber => "BAD_NUMBER",
            CompileCode::BadStepOrder => "BAD_STEP_ORDER",
            CompileCode::EmptyText => "EMPTY_TEXT",
            CompileCode::TextMismatch => "TEXT_MISMATCH",
            CompileCode::BadCueOrder => "BAD_CUE_ORDER",
            CompileCode::CueFieldMismatch => "CUE_FIELD_MISMATCH",
            CompileCode::BadHighlight => "BAD_HIGHLIGHT",
            CompileCode::BadAssetId => "BAD_ASSET_ID",
            CompileCode::EmptyDocument => "EMPTY_DOCUMENT",
        }
    }
}

/// A single diagnostic, located by 1-based source line.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {}: {message}", code.as_str())]
pub struct CompileError {
    pub line: usize,
    pub code: CompileCode,
    pub message: String,
}

impl CompileError {
    fn new(line: usize, code: CompileCode, message: impl Into<String>) -> Self {
        CompileError {
            line,
            code,
            message: message.into(),
        }
    }
}

/// Splits a CSV document into rows. The header must match [`CSV_HEADER`]
/// exactly; fields are comma-separated with double-quote quoting and `""`
/// escaping; LF and CRLF line endings are both accepted; blank lines are
/// skipped. Either all rows parse or all diagnostics are returned.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, Vec<CompileError>> {
    let mut lines = text.lines();
    match lines.next() {
        None => {
            return Err(vec![CompileError::new(
                1,
                CompileCode::BadHeader,
                "document is empty",
            )]);
        }
        Some(header) if header != CSV_HEADER => {
            return Err(vec![CompileError::new(
                1,
                CompileCode::BadHeader,
                format!("header must be exactly `{CSV_HEADER}`"),
            )]);
        }
        Some(_) => {}
    }

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        match split_fields(line) {
            Err(message) => errors.push(CompileError::new(line_no, CompileCode::BadQuote, message)),
            Ok(fields) if fields.len() != FIELD_COUNT => errors.push(CompileError::new(
                line_no,
                CompileCode::BadFieldCount,
                format!("expected {FIELD_COUNT} fields, found {}", fields.len()),
            )),
            Ok(fields) => rows.push(CsvRow {
                line: line_no,
                fields,
            }),
        }
    }
    if errors.is_empty() {
        Ok(rows)
    } else {
        Err(errors)
    }
}

fn split_fields(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        let mut field = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            loop {
                match chars.next() {
                    Some('"') => {
                        if chars.peek() == Some(&'"') {
                            chars.next();
                            field.push('"');
                        } else {
                            break;
                        }
                    }
                    Some(c) => field.push(c),
                    None => return Err("unterminated quoted field".to_string()),
                }
            }
            fields.push(field);
            match chars.next() {
                None => return Ok(fields),
                Some(',') => continue,
                Some(c) => return Err(format!("unexpected `{c}` after closing quote")),
            }
        }
        loop {
            match chars.peek() {
                None => {
                    fields.push(field);
                    return Ok(fields);
                }
                Some(',') => {
                    chars.next();
                    fields.push(field);
                    break;
                }
                Some('"') => return Err("quote inside unquoted field".to_string()),
                Some(&c) => {
                    chars.next();
                    field.push(c);
                }
            }
        }
    }
}

struct ParsedRow {
    line: usize,
    step_index: usize,
    text: String,
    hint: String,
    cue_index: usize,
    asset: Option<AssetRef>,
    highlight: Option<bool>,
    t_offset: Option<f64>,
    pose: Option<Pose>,
}

/// Builds an instruction set from parsed rows. Step indices must be
/// contiguous from 0 in nondecreasing order; inside a step, cue indices must
/// be contiguous from 0 with each cue's keyframe rows consecutive and strictly
/// increasing in time; step text and hint must repeat byte-for-byte across a
/// step's rows. Quaternions within 1e-3 of unit norm are renormalized, anything
/// further out is rejected.
pub fn compile(
    rows: &[CsvRow],
    set_id: &str,
    target_asset: AssetRef,
) -> Result<InstructionSet, Vec<CompileError>> {
    let mut errors: Vec<CompileError> = Vec::new();
    if rows.is_empty() {
        return Err(vec![CompileError::new(
            1,
            CompileCode::EmptyDocument,
            "document contains no instruction rows",
        )]);
    }

    let mut parsed: Vec<ParsedRow> = Vec::new();
    for row in rows {
        if let Some(p) = parse_row(row, &mut errors) {
            parsed.push(p);
        }
    }

    let steps = assemble(&parsed, &mut errors);

    if errors.is_empty() {
        Ok(InstructionSet {
            set_id: set_id.to_string(),
            target_asset,
            steps,
        })
    } else {
        Err(errors)
    }
}

/// Parses and compiles in one call.
pub fn compile_csv(
    text: &str,
    set_id: &str,
    target_asset: AssetRef,
) -> Result<InstructionSet, Vec<CompileError>> {
    let rows = parse_csv(text)?;
    compile(&rows, set_id, target_asset)
}

fn parse_row(row: &CsvRow, errors: &mut Vec<CompileError>) -> Option<ParsedRow> {
    let line = row.line;
    let f = &row.fields;

    let parse_index = |field: usize, errors: &mut Vec<CompileError>| -> Option<usize> {
        match f[field].parse::<u32>() {
            Ok(v) => Some(v as usize),
            Err(_) => {
                errors.push(CompileError::new(
                    line,
                    CompileCode::BadNumber,
                    format!(
                        "{} is not an unsigned integer: `{}`",
                        FIELD_NAMES[field], f[field]
                    ),
                ));
                None
            }
        }
    };
    let parse_real = |field: usize, errors: &mut Vec<CompileError>| -> Option<f64> {
        match f[field].parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                errors.push(CompileError::new(
                    line,
                    CompileCode::BadNumber,
                    format!(
                        "{} is not a finite number: `{}`",
                        FIELD_NAMES[field], f[field]
                    ),
                ));
                None
            }
        }
    };

    // Rows whose grouping keys fail to parse cannot participate in structural
    // checks at all; everything else degrades to a placeholder so later rows
    // still group correctly.
    let step_index = parse_index(0, errors)?;
    let cue_index = parse_index(3, errors)?;

    let text = f[1].clone();
    if text.is_empty() {
        errors.push(CompileError::new(
            line,
            CompileCode::EmptyText,
            "step_text must be non-empty",
        ));
    }
    let hint = f[2].clone();

    let asset = match AssetRef::new(&f[4]) {
        Ok(a) => Some(a),
        Err(e) => {
            errors.push(CompileError::new(
                line,
                CompileCode::BadAssetId,
                e.to_string(),
            ));
            None
        }
    };

    let highlight = match f[5].as_str() {
        "0" => Some(false),
        "1" => Some(true),
        other => {
            errors.push(CompileError::new(
                line,
                CompileCode::BadNumber,
                format!("highlight must be 0 or 1, got `{other}`"),
            ));
            None
        }
    };

    let t_offset = parse_real(6, errors).filter(|t| {
        if *t < 0.0 {
            errors.push(CompileError::new(
                line,
                CompileCode::BadNumber,
                "t_offset_s must be >= 0",
            ));
            false
        } else {
            true
        }
    });

    let px = parse_real(7, errors);
    let py = parse_real(8, errors);
    let pz = parse_real(9, errors);
    let qx = parse_real(10, errors);
    let qy = parse_real(11, errors);
    let qz = parse_real(12, errors);
    let qw = parse_real(13, errors);
    let sx = parse_real(14, errors);
    let sy = parse_real(15, errors);
    let sz = parse_real(16, errors);

    let pose = match (px, py, pz, qx, qy, qz, qw, sx, sy, sz) {
        (
            Some(px),
            Some(py),
            Some(pz),
            Some(qx),
            Some(qy),
            Some(qz),
            Some(qw),
            Some(sx),
            Some(sy),
            Some(sz),
        ) => {
            let rotation = match UnitQuaternion::try_new(qx, qy, qz, qw) {
                Ok(q) => Some(q),
                Err(e) => {
                    errors.push(CompileError::new(
                        line,
                        CompileCode::BadNumber,
                        e.to_string(),
                    ));
                    None
                }
            };
            rotation.and_then(|rotation| {
                match Pose::new(Vec3::new(px, py, pz), rotation, Vec3::new(sx, sy, sz)) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        errors.push(CompileError::new(
                            line,
                            CompileCode::BadNumber,
                            e.to_string(),
                        ));
                        None
                    }
                }
            })
        }
        _ => None,
    };

    Some(ParsedRow {
        line,
        step_index,
        text,
        hint,
        cue_index,
        asset,
        highlight,
        t_offset,
        pose,
    })
}

struct CueAcc {
    index: usize,
    asset: Option<AssetRef>,
    highlight: Option<bool>,
    frames: Vec<Keyframe>,
    last_t: Option<f64>,
    first_line: usize,
}

struct StepAcc {
    index: usize,
    text: String,
    hint: String,
    cues: Vec<ModelCue>,
    cue: Option<CueAcc>,
}

fn assemble(rows: &[ParsedRow], errors: &mut Vec<CompileError>) -> Vec<InstructionStep> {
    let mut steps: Vec<InstructionStep> = Vec::new();
    let mut step: Option<StepAcc> = None;

    let finish_cue = |acc: CueAcc, errors: &mut Vec<CompileError>| -> Option<ModelCue> {
        let highlight = acc.highlight.unwrap_or(false);
        if highlight && acc.frames.len() != 1 {
            errors.push(CompileError::new(
                acc.first_line,
                CompileCode::BadHighlight,
                format!(
                    "highlight cue {} has {} keyframes, expected exactly 1",
                    acc.index,
                    acc.frames.len()
                ),
            ));
        }
        let asset = acc.asset?;
        let track = KeyframeTrack::new(acc.frames).ok()?;
        Some(ModelCue {
            asset,
            highlight,
            track,
        })
    };
    let finish_step = |mut acc: StepAcc, errors: &mut Vec<CompileError>| -> InstructionStep {
        if let Some(cue) = acc.cue.take() {
            if let Some(done) = finish_cue(cue, errors) {
                acc.cues.push(done);
            }
        }
        InstructionStep {
            text: acc.text,
            key_phrase_hint: acc.hint,
            cues: acc.cues,
        }
    };

    for row in rows {
        let start_new_step = match &step {
            None => true,
            Some(acc) => row.step_index != acc.index,
        };

        if start_new_step {
            let expected = step.as_ref().map(|s| s.index + 1).unwrap_or(0);
            if row.step_index != expected {
                errors.push(CompileError::new(
                    row.line,
                    CompileCode::BadStepOrder,
                    format!("expected step index {expected}, got {}", row.step_index),
                ));
            }
            if let Some(acc) = step.take() {
                steps.push(finish_step(acc, errors));
            }
            if row.cue_index != 0 {
                errors.push(CompileError::new(
                    row.line,
                    CompileCode::BadCueOrder,
                    format!(
                        "first cue of a step must have cue_index 0, got {}",
                        row.cue_index
                    ),
                ));
            }
            step = Some(StepAcc {
                index: row.step_index,
                text: row.text.clone(),
                hint: row.hint.clone(),
                cues: Vec::new(),
                cue: Some(CueAcc {
                    index: row.cue_index,
                    asset: row.asset.clone(),
                    highlight: row.highlight,
                    frames: Vec::new(),
                    last_t: None,
                    first_line: row.line,
                }),
            });
        } else {
            let acc = step.as_mut().expect("step is open");
            if row.text != acc.text || row.hint != acc.hint {
                errors.push(CompileError::new(
                    row.line,
                    CompileCode::TextMismatch,
                    "step_text and key_phrase_hint must repeat byte-for-byte within a step",
                ));
            }
            let cue = acc.cue.as_mut().expect("open step always has an open cue");
            if row.cue_index != cue.index {
                if row.cue_index != cue.index + 1 {
                    errors.push(CompileError::new(
                        row.line,
                        CompileCode::BadCueOrder,
                        format!(
                            "expected cue index {} or {}, got {}",
                            cue.index,
                            cue.index + 1,
                            row.cue_index
                        ),
                    ));
                }
                let done = acc.cue.take().expect("open cue");
                if let Some(done) = finish_cue(done, errors) {
                    acc.cues.push(done);
                }
                acc.cue = Some(CueAcc {
                    index: row.cue_index,
                    asset: row.asset.clone(),
                    highlight: row.highlight,
                    frames: Vec::new(),
                    last_t: None,
                    first_line: row.line,
                });
            } else {
                let cue = acc.cue.as_mut().expect("open cue");
                if let (Some(a), Some(b)) = (&cue.asset, &row.asset) {
                    if a != b {
                        errors.push(CompileError::new(
                            row.line,
                            CompileCode::CueFieldMismatch,
                            format!("asset_id changed within cue {} (`{a}` vs `{b}`)", cue.index),
                        ));
                    }
                }
                if let (Some(a), Some(b)) = (cue.highlight, row.highlight) {
                    if a != b {
                        errors.push(CompileError::new(
                            row.line,
                            CompileCode::CueFieldMismatch,
                            format!("highlight flag changed within cue {}", cue.index),
                        ));
                    }
                }
            }
        }

        // Append the keyframe to whichever cue is now open.
        let acc = step.as_mut().expect("step is open");
        let cue = acc.cue.as_mut().expect("open cue");
        if let (Some(t), Some(pose)) = (row.t_offset, row.pose) {
            match cue.last_t {
                Some(last) if t <= last => {
                    errors.push(CompileError::new(
                        row.line,
                        CompileCode::BadCueOrder,
                        format!(
                            "keyframe times within a cue must strictly increase ({t} after {last})"
                        ),
                    ));
                }
                _ => {
                    cue.last_t = Some(t);
                    cue.frames.push(Keyframe { t_offset: t, pose });
                }
            }
        }
    }

    if let Some(acc) = step.take() {
        steps.push(finish_step(acc, errors));
    }
    steps
}

/// Renders a set back to canonical CSV. Inverse of [`compile_csv`] for any
/// set whose steps all carry at least one cue (a cue-less step has no row to
/// live in).
pub fn emit_csv(set: &InstructionSet) -> Result<String, CompileError> {
    let mut out = String::with_capacity(1024);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (si, step) in set.steps.iter().enumerate() {
        if step.cues.is_empty() {
            return Err(CompileError::new(
                1,
                CompileCode::EmptyDocument,
                format!("step {si} has no cues and cannot be represented as rows"),
            ));
        }
        for (ci, cue) in step.cues.iter().enumerate() {
            for kf in &cue.track.keyframes {
                let p = kf.pose;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    si,
                    quote_field(&step.text),
                    quote_field(&step.key_phrase_hint),
                    ci,
                    quote_field(cue.asset.as_str()),
                    u8::from(cue.highlight),
                    kf.t_offset,
                    p.position.x,
                    p.position.y,
                    p.position.z,
                    p.rotation.x,
                    p.rotation.y,
                    p.rotation.z,
                    p.rotation.w,
                    p.scale.x,
                    p.scale.y,
                    p.scale.z,
                ));
            }
        }
    }
    Ok(out)
}

fn quote_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
