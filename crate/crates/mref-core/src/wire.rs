//! Canonical compact binary encoding of instruction sets for uplink.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic `MRIS` (4) · version u16 · set_id (u16 len + UTF-8) ·
//! target_asset (u16 + UTF-8) · step_count u16 ·
//! per step:  hint (u16 + UTF-8) · text (u16 + UTF-8) · cue_count u8 ·
//! per cue:   asset_id (u16 + UTF-8) · highlight u8 · keyframe_count u16 ·
//! per frame: t f32 · pos 3×f32 · quat 4×f32 (x,y,z,w) · scale 3×f32 ·
//! trailer:   CRC32 (IEEE, over all preceding bytes) u32
//! ```
//!
//! Encoding is deterministic: equal sets produce identical bytes. Poses travel
//! as 32-bit floats; decoded quaternions are renormalized, which the unit-norm
//! tolerance absorbs.

use thiserror::Error;

use crate::catalog::AssetCatalog;
use crate::instructions::{self, AssetRef, InstructionSet, InstructionStep, ModelCue, ModelError};
use crate::pose::{Keyframe, KeyframeTrack, Pose, UnitQuaternion, Vec3};

pub const MAGIC: [u8; 4] = *b"MRIS";
pub const VERSION: u16 = 1;

/// Bytes of one keyframe on the wire: t + position + quaternion + scale.
pub const KEYFRAME_WIRE_BYTES: usize = 4 * (1 + 3 + 4 + 3);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("document does not start with the MRIS magic")]
    BadMagic,
    #[error("unsupported wire version {0}")]
    BadVersion(u16),
    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("document truncated while reading {context}")]
    Truncated { context: &'static str },
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),
}

/// One encoded instruction document, exactly the content of an `.mri` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireDocument {
    bytes: Vec<u8>,
}

impl WireDocument {
    /// Wraps raw bytes read from storage. No checks happen here; [`decode`]
    /// performs them all.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        WireDocument { bytes }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer {
            buf: Vec::with_capacity(256),
        }
    }

    fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn put_u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn put_str(&mut self, s: &str, context: &str) -> Result<(), WireError> {
        let len: u16 = s.len().try_into().map_err(|_| {
            WireError::LimitExceeded(format!("{context} exceeds {} bytes", u16::MAX))
        })?;
        self.put_u16(len);
        self.buf.extend_from_slice(s.as_bytes());
        Ok(())
    }

    fn put_f32(&mut self, v: f64, context: &str) -> Result<(), WireError> {
        let narrowed = v as f32;
        if !narrowed.is_finite() {
            return Err(WireError::LimitExceeded(format!(
                "{context} value {v} not representable as f32"
            )));
        }
        self.buf.extend_from_slice(&narrowed.to_le_bytes());
        Ok(())
    }
}

/// Encodes a set into its canonical wire form. Fails when any count or value
/// exceeds its field width: more than 65535 steps or keyframes per cue, more
/// than 255 cues per step, strings longer than 65535 bytes, floats outside f32
/// range, or keyframe times that collapse together after f32 narrowing.
pub fn encode(set: &InstructionSet) -> Result<WireDocument, WireError> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(&MAGIC);
    w.put_u16(VERSION);
    w.put_str(&set.set_id, "set_id")?;
    w.put_str(set.target_asset.as_str(), "target_asset")?;

    let step_count: u16 = set.steps.len().try_into().map_err(|_| {
        WireError::LimitExceeded(format!("{} steps exceed the u16 limit", set.steps.len()))
    })?;
    w.put_u16(step_count);

    for step in &set.steps {
        w.put_str(&step.key_phrase_hint, "key_phrase_hint")?;
        w.put_str(&step.text, "step text")?;
        let cue_count: u8 = step.cues.len().try_into().map_err(|_| {
            WireError::LimitExceeded(format!("{} cues exceed the u8 limit", step.cues.len()))
        })?;
        w.put_u8(cue_count);
        for cue in &step.cues {
            w.put_str(cue.asset.as_str(), "asset_id")?;
            w.put_u8(u8::from(cue.highlight));
            let kf_count: u16 = cue.track.keyframes.len().try_into().map_err(|_| {
                WireError::LimitExceeded(format!(
                    "{} keyframes exceed the u16 limit",
                    cue.track.keyframes.len()
                ))
            })?;
            w.put_u16(kf_count);
            let mut prev_t: Option<f32> = None;
            for kf in &cue.track.keyframes {
                let t32 = kf.t_offset as f32;
                if let Some(prev) = prev_t {
                    if t32 <= prev {
                        return Err(WireError::LimitExceeded(format!(
                            "keyframe times {prev} and {t32} collapse at f32 resolution"
                        )));
                    }
                }
                prev_t = Some(t32);
                w.put_f32(kf.t_offset, "t_offset")?;
                w.put_f32(kf.pose.position.x, "position")?;
                w.put_f32(kf.pose.position.y, "position")?;
                w.put_f32(kf.pose.position.z, "position")?;
                w.put_f32(kf.pose.rotation.x, "rotation")?;
                w.put_f32(kf.pose.rotation.y, "rotation")?;
                w.put_f32(kf.pose.rotation.z, "rotation")?;
                w.put_f32(kf.pose.rotation.w, "rotation")?;
                let s = kf.pose.scale;
                for (axis, v) in [("sx", s.x), ("sy", s.y), ("sz", s.z)] {
                    if (v as f32) <= 0.0 {
                        return Err(WireError::LimitExceeded(format!(
                            "scale {axis}={v} underflows to zero at f32 resolution"
                        )));
                    }
                    w.put_f32(v, "scale")?;
                }
            }
        }
    }

    let crc = crc32fast::hash(&w.buf);
    w.buf.extend_from_slice(&crc.to_le_bytes());
    Ok(WireDocument { bytes: w.buf })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.buf.len() {
            return Err(WireError::Truncated { context });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u8(&mut self, context: &'static str) -> Result<u8, WireError> {
        Ok(self.take(1, context)?[0])
    }

    fn take_u16(&mut self, context: &'static str) -> Result<u16, WireError> {
        let b = self.take(2, context)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn take_f32(&mut self, context: &'static str) -> Result<f64, WireError> {
        let b = self.take(4, context)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
    }

    fn take_str(&mut self, context: &'static str) -> Result<String, WireError> {
        let len = self.take_u16(context)? as usize;
        let bytes = self.take(len, context)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| WireError::Malformed(format!("{context} is not valid UTF-8")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Decodes a wire document back into an instruction set, rejecting anything
/// that is not the exact image of [`encode`] on a valid set.
pub fn decode(bytes: &[u8]) -> Result<InstructionSet, WireError> {
    let mut r = Reader { buf: bytes, pos: 0 };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(WireError::BadMagic);
    }
    let version = r.take_u16("version")?;
    if version != VERSION {
        return Err(WireError::BadVersion(version));
    }

    let set_id = r.take_str("set_id")?;
    let target_raw = r.take_str("target_asset")?;
    let step_count = r.take_u16("step_count")? as usize;

    let mut steps = Vec::with_capacity(step_count.min(1024));
    for _ in 0..step_count {
        let key_phrase_hint = r.take_str("key_phrase_hint")?;
        let text = r.take_str("step text")?;
        let cue_count = r.take_u8("cue_count")? as usize;
        let mut cues = Vec::with_capacity(cue_count);
        for _ in 0..cue_count {
            let asset_raw = r.take_str("asset_id")?;
            let highlight = match r.take_u8("highlight flag")? {
                0 => false,
                1 => true,
                other => {
                    return Err(WireError::Malformed(format!(
                        "highlight flag must be 0 or 1, got {other}"
                    )))
                }
            };
            let kf_count = r.take_u16("keyframe_count")? as usize;
            let mut frames = Vec::with_capacity(kf_count.min(4096));
            for _ in 0..kf_count {
                let t_offset = r.take_f32("keyframe time")?;
                let position = Vec3::new(
                    r.take_f32("position")?,
                    r.take_f32("position")?,
                    r.take_f32("position")?,
                );
                let qx = r.take_f32("rotation")?;
                let qy = r.take_f32("rotation")?;
                let qz = r.take_f32("rotation")?;
                let qw = r.take_f32("rotation")?;
                let scale = Vec3::new(
                    r.take_f32("scale")?,
                    r.take_f32("scale")?,
                    r.take_f32("scale")?,
                );
                let rotation = UnitQuaternion::try_new(qx, qy, qz, qw)
                    .map_err(|e| WireError::Malformed(e.to_string()))?;
                let pose = Pose::new(position, rotation, scale)
                    .map_err(|e| WireError::Malformed(e.to_string()))?;
                frames.push(Keyframe { t_offset, pose });
            }
            let track =
                KeyframeTrack::new(frames).map_err(|e| WireError::Malformed(e.to_string()))?;
            if highlight && track.keyframes.len() != 1 {
                return Err(WireError::Malformed(format!(
                    "highlight cue carries {} keyframes, expected 1",
                    track.keyframes.len()
                )));
            }
            let asset =
                AssetRef::new(&asset_raw).map_err(|e| WireError::Malformed(e.to_string()))?;
            cues.push(ModelCue {
                asset,
                highlight,
                track,
            });
        }
        if text.is_empty() {
            return Err(WireError::Malformed(
                "step text must be non-empty".to_string(),
            ));
        }
        steps.push(InstructionStep {
            text,
            key_phrase_hint,
            cues,
        });
    }

    let stored = u32::from_le_bytes(
        r.take(4, "CRC trailer")?
            .try_into()
            .expect("slice of length 4"),
    );
    if r.remaining() != 0 {
        return Err(WireError::Malformed(format!(
            "{} trailing bytes after CRC",
            r.remaining()
        )));
    }
    let computed = crc32fast::hash(&bytes[..bytes.len() - 4]);
    if stored != computed {
        return Err(WireError::CrcMismatch { stored, computed });
    }

    if steps.is_empty() {
        return Err(WireError::Malformed(
            "set must contain at least one step".to_string(),
        ));
    }
    if set_id.is_empty() {
        return Err(WireError::Malformed("set id must be non-empty".to_string()));
    }
    let target_asset =
        AssetRef::new(&target_raw).map_err(|e| WireError::Malformed(e.to_string()))?;

    Ok(InstructionSet {
        set_id,
        target_asset,
        steps,
    })
}

/// Wire size of a set next to the catalog bytes it merely references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeReport {
    pub wire_bytes: u64,
    pub referenced_asset_bytes: u64,
    /// `referenced_asset_bytes / wire_bytes`.
    pub reduction_ratio: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SizeReportError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Compares the encoded size of `set` against the total catalog bytes of the
/// assets it references.
pub fn size_report(
    set: &InstructionSet,
    catalog: &AssetCatalog,
) -> Result<SizeReport, SizeReportError> {
    let referenced_asset_bytes = instructions::referenced_bytes(set, catalog)?;
    let wire_bytes = encode(set)?.len() as u64;
    Ok(SizeReport {
        wire_bytes,
        referenced_asset_bytes,
        reduction_ratio: referenced_asset_bytes as f64 / wire_bytes as f64,
    })
}
