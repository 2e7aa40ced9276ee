//! Shared proptest strategies for instruction-set structures.
#![allow(dead_code)] // each test target uses its own subset

use mref_core::instructions::{AssetRef, InstructionSet, InstructionStep, ModelCue};
use mref_core::pose::{Keyframe, KeyframeTrack, Pose, UnitQuaternion, Vec3};
use proptest::prelude::*;

/// Quaternions that are exactly unit in both f64 and f32: axis-aligned
/// half/full turns plus the sixteen (±½, ±½, ±½, ±½) versors.
pub fn exact_unit_quats() -> Vec<UnitQuaternion> {
    let mut quats = vec![
        UnitQuaternion {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            w: 1.0,
        },
        UnitQuaternion {
            x: 1.0,
            y: 0.0,
            z: 0.0,
            w: 0.0,
        },
        UnitQuaternion {
            x: 0.0,
            y: 1.0,
            z: 0.0,
            w: 0.0,
        },
        UnitQuaternion {
            x: 0.0,
            y: 0.0,
            z: 1.0,
            w: 0.0,
        },
    ];
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            for sz in [-0.5, 0.5] {
                for sw in [-0.5, 0.5] {
                    quats.push(UnitQuaternion {
                        x: sx,
                        y: sy,
                        z: sz,
                        w: sw,
                    });
                }
            }
        }
    }
    quats
}

pub fn exact_unit_quat() -> impl Strategy<Value = UnitQuaternion> + Clone {
    let table = exact_unit_quats();
    (0..table.len()).prop_map(move |i| table[i])
}

/// Arbitrary unit quaternion, renormalized from a random 4-vector.
pub fn random_unit_quat() -> impl Strategy<Value = UnitQuaternion> + Clone {
    (
        (-1.0f64..1.0),
        (-1.0f64..1.0),
        (-1.0f64..1.0),
        (-1.0f64..1.0),
    )
        .prop_filter("norm too small", |(x, y, z, w)| {
            (x * x + y * y + z * z + w * w).sqrt() > 0.1
        })
        .prop_map(|(x, y, z, w)| UnitQuaternion { x, y, z, w }.renormalized())
}

/// Values on a grid exactly representable as f32 (and back).
pub fn grid_value() -> impl Strategy<Value = f64> + Clone {
    (-6400i32..6400).prop_map(|i| i as f64 / 64.0)
}

fn grid_scale_value() -> impl Strategy<Value = f64> + Clone {
    (1i32..256).prop_map(|i| i as f64 / 64.0)
}

/// Pose whose encoding to f32 and back is lossless.
pub fn grid_pose() -> impl Strategy<Value = Pose> + Clone {
    (
        grid_value(),
        grid_value(),
        grid_value(),
        exact_unit_quat(),
        grid_scale_value(),
        grid_scale_value(),
        grid_scale_value(),
    )
        .prop_map(|(px, py, pz, rotation, sx, sy, sz)| Pose {
            position: Vec3::new(px, py, pz),
            rotation,
            scale: Vec3::new(sx, sy, sz),
        })
}

/// Pose with full-precision components and an arbitrary unit rotation.
pub fn rich_pose() -> impl Strategy<Value = Pose> + Clone {
    (
        (-100.0f64..100.0),
        (-100.0f64..100.0),
        (-100.0f64..100.0),
        random_unit_quat(),
        (0.05f64..20.0),
        (0.05f64..20.0),
        (0.05f64..20.0),
    )
        .prop_map(|(px, py, pz, rotation, sx, sy, sz)| Pose {
            position: Vec3::new(px, py, pz),
            rotation,
            scale: Vec3::new(sx, sy, sz),
        })
}

fn track_from_poses(poses: Vec<Pose>, grid_times: bool) -> KeyframeTrack {
    let keyframes = poses
        .into_iter()
        .enumerate()
        .map(|(i, pose)| Keyframe {
            t_offset: if grid_times {
                i as f64 * 0.25
            } else {
                i as f64 * 0.37 + 0.01
            },
            pose,
        })
        .collect();
    KeyframeTrack::new(keyframes).expect("generated tracks are monotone")
}

pub fn asset_id() -> impl Strategy<Value = AssetRef> + Clone {
    "[a-z][a-z0-9_]{0,11}".prop_map(|s| AssetRef::new(&s).expect("generated ids are valid"))
}

/// Printable single-line text, safe for both the wire and the CSV emitter.
pub fn line_text() -> impl Strategy<Value = String> + Clone {
    "[ -~]{1,40}"
}

fn cue(
    pose: impl Strategy<Value = Pose> + Clone,
    grid_times: bool,
) -> impl Strategy<Value = ModelCue> + Clone {
    (asset_id(), any::<bool>(), prop::collection::vec(pose, 1..5)).prop_map(
        move |(asset, highlight, poses)| {
            if highlight {
                let track = track_from_poses(poses[..1].to_vec(), grid_times);
                ModelCue {
                    asset,
                    highlight: true,
                    track,
                }
            } else {
                ModelCue {
                    asset,
                    highlight: false,
                    track: track_from_poses(poses, grid_times),
                }
            }
        },
    )
}

fn step(
    pose: impl Strategy<Value = Pose> + Clone,
    min_cues: usize,
    grid_times: bool,
) -> impl Strategy<Value = InstructionStep> + Clone {
    (
        line_text(),
        line_text(),
        prop::collection::vec(cue(pose, grid_times), min_cues..4),
    )
        .prop_map(|(text, key_phrase_hint, cues)| InstructionStep {
            text,
            key_phrase_hint,
            cues,
        })
}

fn set_with(
    pose: impl Strategy<Value = Pose> + Clone,
    min_cues: usize,
    grid_times: bool,
) -> impl Strategy<Value = InstructionSet> + Clone {
    (
        "[a-z][a-z0-9_]{0,15}",
        asset_id(),
        prop::collection::vec(step(pose, min_cues, grid_times), 1..6),
    )
        .prop_map(|(set_id, target_asset, steps)| InstructionSet {
            set_id,
            target_asset,
            steps,
        })
}

/// Instruction sets that survive the f32 wire round trip bit-for-bit.
pub fn grid_instruction_set() -> impl Strategy<Value = InstructionSet> + Clone {
    set_with(grid_pose(), 0, true)
}

/// Full-precision instruction sets with at least one cue per step, suitable
/// for the CSV round trip.
pub fn rich_instruction_set() -> impl Strategy<Value = InstructionSet> + Clone {
    set_with(rich_pose(), 1, false)
}
