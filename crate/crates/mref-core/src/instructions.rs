//! The instruction-set data model and validation/resolution of its links into
//! the on-device asset catalog.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::catalog::AssetCatalog;
use crate::pose::{KeyframeTrack, Pose, UNIT_NORM_TOLERANCE};

/// Reference into the asset catalog: a non-empty UTF-8 identifier of at most
/// 255 bytes with no control characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AssetRef(String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssetRefError {
    #[error("asset id must be non-empty")]
    Empty,
    #[error("asset id exceeds 255 bytes ({0})")]
    TooLong(usize),
    #[error("asset id contains a control character")]
    ControlCharacter,
}

impl AssetRef {
    pub fn new(id: &str) -> Result<Self, AssetRefError> {
        if id.is_empty() {
            return Err(AssetRefError::Empty);
        }
        if id.len() > 255 {
            return Err(AssetRefError::TooLong(id.len()));
        }
        if id.chars().any(|c| c.is_control()) {
            return Err(AssetRefError::ControlCharacter);
        }
        Ok(AssetRef(id.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AssetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One overlay attached to an instruction step: either a static highlight
/// marker (single keyframe) or an animated model moving along its track.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCue {
    pub asset: AssetRef,
    pub highlight: bool,
    pub track: KeyframeTrack,
}

/// One step of a procedure. The step index is its position in the parent
/// list.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionStep {
    pub text: String,
    pub key_phrase_hint: String,
    pub cues: Vec<ModelCue>,
}

/// An ordered procedure authored against a tracked target object.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionSet {
    pub set_id: String,
    pub target_asset: AssetRef,
    pub steps: Vec<InstructionStep>,
}

/// Machine-readable reasons a set can fail validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationCode {
    MissingAsset,
    NonUnitQuaternion,
    NonMonotonicTrack,
    EmptyTrack,
    HighlightMultiKeyframe,
    BadPoseNumber,
    EmptyStepText,
    EmptySetId,
    EmptySet,
}

impl ValidationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationCode::MissingAsset => "MISSING_ASSET",
            ValidationCode::NonUnitQuaternion => "NON_UNIT_QUATERNION",
            ValidationCode::NonMonotonicTrack => "NON_MONOTONIC_TRACK",
            ValidationCode::EmptyTrack => "EMPTY_TRACK",
            ValidationCode::HighlightMultiKeyframe => "HIGHLIGHT_MULTI_KEYFRAME",
            ValidationCode::BadPoseNumber => "BAD_POSE_NUMBER",
            ValidationCode::EmptyStepText => "EMPTY_STEP_TEXT",
            ValidationCode::EmptySetId => "EMPTY_SET_ID",
            ValidationCode::EmptySet => "EMPTY_SET",
        }
    }
}

/// One validation finding, located by step and cue where applicable.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub step: Option<usize>,
    pub cue: Option<usize>,
    pub code: ValidationCode,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.step, self.cue) {
            (Some(s), Some(c)) => write!(
                f,
                "step {s} cue {c}: {} ({})",
                self.message,
                self.code.as_str()
            ),
            (Some(s), None) => write!(f, "step {s}: {} ({})", self.message, self.code.as_str()),
            _ => write!(f, "{} ({})", self.message, self.code.as_str()),
        }
    }
}

/// Outcome of validating a set against a catalog. `ok()` iff no issues.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("instruction set failed validation: {first_issue}")]
    UnvalidatedSet { first_issue: String },
    #[error("step {step} out of range (set has {count} steps)")]
    StepOutOfRange { step: usize, count: usize },
}

/// Checks every catalog link and every data invariant of `set`, reporting all
/// findings instead of stopping at the first.
pub fn validate(set: &InstructionSet, catalog: &AssetCatalog) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |step, cue, code: ValidationCode, message: String| {
        issues.push(ValidationIssue {
            step,
            cue,
            code,
            message,
        });
    };

    if set.set_id.is_empty() {
        push(
            None,
            None,
            ValidationCode::EmptySetId,
            "set id must be non-empty".into(),
        );
    }
    if set.steps.is_empty() {
        push(
            None,
            None,
            ValidationCode::EmptySet,
            "set must contain at least one step".into(),
        );
    }
    if !catalog.contains(set.target_asset.as_str()) {
        push(
            None,
            None,
            ValidationCode::MissingAsset,
            format!("target asset `{}` not in catalog", set.target_asset),
        );
    }

    for (si, step) in set.steps.iter().enumerate() {
        if step.text.is_empty() {
            push(
                Some(si),
                None,
                ValidationCode::EmptyStepText,
                "step text must be non-empty".into(),
            );
        }
        for (ci, cue) in step.cues.iter().enumerate() {
            if !catalog.contains(cue.asset.as_str()) {
                push(
                    Some(si),
                    Some(ci),
                    ValidationCode::MissingAsset,
                    format!("cue asset `{}` not in catalog", cue.asset),
                );
            }
            let frames = &cue.track.keyframes;
            if frames.is_empty() {
                push(
                    Some(si),
                    Some(ci),
                    ValidationCode::EmptyTrack,
                    "track has no keyframes".into(),
                );
                continue;
            }
            if cue.highlight && frames.len() != 1 {
                push(
                    Some(si),
                    Some(ci),
                    ValidationCode::HighlightMultiKeyframe,
                    format!("highlight cue has {} keyframes, expected 1", frames.len()),
                );
            }
            let times_ok = frames
                .iter()
                .all(|k| k.t_offset.is_finite() && k.t_offset >= 0.0)
                && frames.windows(2).all(|w| w[0].t_offset < w[1].t_offset);
            if !times_ok {
                push(
                    Some(si),
                    Some(ci),
                    ValidationCode::NonMonotonicTrack,
                    "keyframe times must be finite, non-negative and strictly increasing".into(),
                );
            }
            for (ki, kf) in frames.iter().enumerate() {
                let q = kf.pose.rotation;
                let norm = q.norm();
                if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                    push(
                        Some(si),
                        Some(ci),
                        ValidationCode::NonUnitQuaternion,
                        format!("keyframe {ki} rotation norm {norm} outside unit tolerance"),
                    );
                }
                let s = kf.pose.scale;
                if !kf.pose.position.is_finite()
                    || !s.is_finite()
                    || s.x <= 0.0
                    || s.y <= 0.0
                    || s.z <= 0.0
                {
                    push(
                        Some(si),
                        Some(ci),
                        ValidationCode::BadPoseNumber,
                        format!("keyframe {ki} has a non-finite component or non-positive scale"),
                    );
                }
            }
        }
    }
    ValidationReport { issues }
}

/// A cue of one step placed in the world frame at animation time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedCue {
    pub asset_id: String,
    pub display_name: String,
    pub world_pose: Pose,
    pub highlight: bool,
}

fn require_valid(set: &InstructionSet, catalog: &AssetCatalog) -> Result<(), ModelError> {
    let report = validate(set, catalog);
    match report.issues.first() {
        None => Ok(()),
        Some(first) => Err(ModelError::UnvalidatedSet {
            first_issue: first.to_string(),
        }),
    }
}

/// Places every cue of step `step` relative to the tracked target's pose at
/// animation time `t`, in cue order.
pub fn resolve(
    set: &InstructionSet,
    catalog: &AssetCatalog,
    target_pose: &Pose,
    step: usize,
    t: f64,
) -> Result<Vec<ResolvedCue>, ModelError> {
    require_valid(set, catalog)?;
    let instruction = set.steps.get(step).ok_or(ModelError::StepOutOfRange {
        step,
        count: set.steps.len(),
    })?;
    Ok(instruction
        .cues
        .iter()
        .map(|cue| {
            let entry = catalog
                .get(cue.asset.as_str())
                .expect("validated against catalog");
            ResolvedCue {
                asset_id: cue.asset.as_str().to_string(),
                display_name: entry.display_name.clone(),
                world_pose: target_pose.compose(&cue.track.sample(t)),
                highlight: cue.highlight,
            }
        })
        .collect())
}

/// Total catalog bytes the set links to: each distinct referenced asset
/// (target plus cues) counted once.
pub fn referenced_bytes(set: &InstructionSet, catalog: &AssetCatalog) -> Result<u64, ModelError> {
    require_valid(set, catalog)?;
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    seen.insert(set.target_asset.as_str());
    for step in &set.steps {
        for cue in &step.cues {
            seen.insert(cue.asset.as_str());
        }
    }
    Ok(seen
        .iter()
        .map(|id| {
            catalog
                .get(id)
                .expect("validated against catalog")
                .byte_size
        })
        .sum())
}
