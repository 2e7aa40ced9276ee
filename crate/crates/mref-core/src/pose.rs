//! Quaternion and pose algebra for placing instruction overlays relative to a
//! tracked target object and animating them along keyframe tracks.
//!
//! Conventions, fixed once for the whole crate: Hamilton product, `(x, y, z, w)`
//! component order, right-handed frames, rotations act on column vectors.
//! Angles are radians, positions meters, scale factors unitless.

use thiserror::Error;

/// Largest deviation from unit norm accepted when a quaternion arrives from an
/// external source (CSV fields, wire floats). Inside the tolerance the value is
/// renormalized; outside it is rejected.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-3;

/// Norm drift guaranteed after construction and after every algebraic
/// operation on a [`UnitQuaternion`].
pub const UNIT_NORM_DRIFT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("quaternion norm {norm} deviates from 1 by more than {UNIT_NORM_TOLERANCE}")]
    NonUnitQuaternion { norm: f64 },
    #[error("non-finite component in {context}")]
    NonFinite { context: &'static str },
    #[error("interpolation parameter {t} outside [0, 1]")]
    ParameterOutOfRange { t: f64 },
    #[error("scale components must be strictly positive, got ({x}, {y}, {z})")]
    NonPositiveScale { x: f64, y: f64, z: f64 },
    #[error("rotation axis must have nonzero length")]
    ZeroAxis,
    #[error("keyframe track must contain at least one keyframe")]
    EmptyTrack,
    #[error("keyframe times must be finite, non-negative and strictly increasing")]
    NonMonotonicTrack,
}

/// Three-component vector. Carries positions (meters) or scale factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };
    pub const ONE: Vec3 = Vec3 {
        x: 1.0,
        y: 1.0,
        z: 1.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    pub fn dot(self, rhs: Vec3) -> f64 {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Componentwise product, used for scale application.
    pub fn component_mul(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x * rhs.x, self.y * rhs.y, self.z * rhs.z)
    }

    pub fn scaled(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Rotation stored as a unit quaternion `(x, y, z, w)` with `w` the scalar part.
///
/// Constructors and operations keep the norm within [`UNIT_NORM_DRIFT`] of 1.
/// The fields are public so ingestion layers can carry candidate values;
/// anything not produced by a constructor here is audited by
/// `instructions::validate` before use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        w: 1.0,
    };

    /// Accepts components whose norm is within [`UNIT_NORM_TOLERANCE`] of 1
    /// and renormalizes them; rejects anything further out.
    pub fn try_new(x: f64, y: f64, z: f64, w: f64) -> Result<Self, PoseError> {
        let q = UnitQuaternion { x, y, z, w };
        if !(x.is_finite() && y.is_finite() && z.is_finite() && w.is_finite()) {
            return Err(PoseError::NonFinite {
                context: "quaternion",
            });
        }
        let norm = q.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(PoseError::NonUnitQuaternion { norm });
        }
        Ok(q.renormalized())
    }

    pub fn from_axis_angle(axis: Vec3, angle_rad: f64) -> Result<Self, PoseError> {
        if !axis.is_finite() || !angle_rad.is_finite() {
            return Err(PoseError::NonFinite {
                context: "axis-angle",
            });
        }
        let len = axis.norm();
        if len == 0.0 {
            return Err(PoseError::ZeroAxis);
        }
        let half = angle_rad * 0.5;
        let s = half.sin() / len;
        Ok(UnitQuaternion {
            x: axis.x * s,
            y: axis.y * s,
            z: axis.z * s,
            w: half.cos(),
        }
        .renormalized())
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn dot(self, rhs: UnitQuaternion) -> f64 {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z + self.w * rhs.w
    }

    pub fn conjugate(self) -> UnitQuaternion {
        UnitQuaternion {
            x: -self.x,
            y: -self.y,
            z: -self.z,
            w: self.w,
        }
    }

    /// Renormalizes, skipping the division when the norm is already within a
    /// few ulps of 1 so that renormalization is idempotent bit-for-bit.
    pub fn renormalized(self) -> UnitQuaternion {
        let norm = self.norm();
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return self;
        }
        let inv = 1.0 / norm;
        UnitQuaternion {
            x: self.x * inv,
            y: self.y * inv,
            z: self.z * inv,
            w: self.w * inv,
        }
    }

    /// Rotates `v` by this quaternion (`q v q*`). Preserves the Euclidean norm.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        // q v q* expanded via the double-cross-product form.
        let u = Vec3::new(self.x, self.y, self.z);
        let cross = |a: Vec3, b: Vec3| {
            Vec3::new(
                a.y * b.z - a.z * b.y,
                a.z * b.x - a.x * b.z,
                a.x * b.y - a.y * b.x,
            )
        };
        let uv = cross(u, v);
        let uuv = cross(u, uv);
        v + (uv.scaled(self.w) + uuv).scaled(2.0)
    }

    /// Spherical interpolation along the shortest arc, constant angular
    /// velocity in `t`. Falls back to normalized linear interpolation when the
    /// endpoints are nearly aligned.
    pub fn slerp(self, other: UnitQuaternion, t: f64) -> Result<UnitQuaternion, PoseError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(PoseError::ParameterOutOfRange { t });
        }
        let mut dot = self.dot(other);
        let mut end = other;
        if dot < 0.0 {
            end = UnitQuaternion {
                x: -end.x,
                y: -end.y,
                z: -end.z,
                w: -end.w,
            };
            dot = -dot;
        }
        if dot > 1.0 - 1e-6 {
            let lerp = UnitQuaternion {
                x: self.x + (end.x - self.x) * t,
                y: self.y + (end.y - self.y) * t,
                z: self.z + (end.z - self.z) * t,
                w: self.w + (end.w - self.w) * t,
            };
            return Ok(lerp.renormalized());
        }
        let theta = dot.clamp(-1.0, 1.0).acos();
        let sin_theta = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / sin_theta;
        let wb = (t * theta).sin() / sin_theta;
        Ok(UnitQuaternion {
            x: self.x * wa + end.x * wb,
            y: self.y * wa + end.y * wb,
            z: self.z * wa + end.z * wb,
            w: self.w * wa + end.w * wb,
        }
        .renormalized())
    }

    /// Angle in radians of the relative rotation between `self` and `other`.
    pub fn angle_to(self, other: UnitQuaternion) -> f64 {
        2.0 * self.dot(other).abs().clamp(0.0, 1.0).acos()
    }
}

impl std::ops::Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    /// Hamilton product; the result applies `rhs` first, then `self`.
    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        let (ax, ay, az, aw) = (self.x, self.y, self.z, self.w);
        let (bx, by, bz, bw) = (rhs.x, rhs.y, rhs.z, rhs.w);
        UnitQuaternion {
            x: aw * bx + ax * bw + ay * bz - az * by,
            y: aw * by - ax * bz + ay * bw + az * bx,
            z: aw * bz + ax * by - ay * bx + az * bw,
            w: aw * bw - ax * bx - ay * by - az * bz,
        }
        .renormalized()
    }
}

/// Placement of one object: position, orientation, and per-axis scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: UnitQuaternion,
    pub scale: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        rotation: UnitQuaternion::IDENTITY,
        scale: Vec3::ONE,
    };

    pub fn new(position: Vec3, rotation: UnitQuaternion, scale: Vec3) -> Result<Self, PoseError> {
        if !position.is_finite() {
            return Err(PoseError::NonFinite {
                context: "position",
            });
        }
        if !(scale.is_finite() && scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0) {
            return Err(PoseError::NonPositiveScale {
                x: scale.x,
                y: scale.y,
                z: scale.z,
            });
        }
        Ok(Pose {
            position,
            rotation,
            scale,
        })
    }

    /// World placement of a cue authored relative to this pose as the target
    /// frame (target at the origin when authored):
    ///
    /// * position: `target.position + target.rotation · (target.scale ⊙ relative.position)`
    /// * rotation: `target.rotation · relative.rotation`
    /// * scale: `target.scale ⊙ relative.scale`
    ///
    /// For uniform scale this agrees with composing the corresponding
    /// homogeneous scale→rotate→translate matrices; with non-uniform scale the
    /// matrix product picks up shear that this transform hierarchy drops.
    pub fn compose(&self, relative: &Pose) -> Pose {
        Pose {
            position: self.position
                + self
                    .rotation
                    .rotate(self.scale.component_mul(relative.position)),
            rotation: self.rotation * relative.rotation,
            scale: self.scale.component_mul(relative.scale),
        }
    }
}

/// One sample on an animation track: a pose to reach `t_offset` seconds after
/// the track starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub t_offset: f64,
    pub pose: Pose,
}

/// Time-ordered, non-empty keyframe sequence.
///
/// The field is public so ingestion layers can stage unchecked data; tracks
/// built by [`KeyframeTrack::new`] always satisfy the ordering invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeTrack {
    pub keyframes: Vec<Keyframe>,
}

impl KeyframeTrack {
    pub fn new(keyframes: Vec<Keyframe>) -> Result<Self, PoseError> {
        if keyframes.is_empty() {
            return Err(PoseError::EmptyTrack);
        }
        let times_ok = keyframes
            .iter()
            .all(|k| k.t_offset.is_finite() && k.t_offset >= 0.0)
            && keyframes.windows(2).all(|w| w[0].t_offset < w[1].t_offset);
        if !times_ok {
            return Err(PoseError::NonMonotonicTrack);
        }
        Ok(KeyframeTrack { keyframes })
    }

    /// Pose at time `t`: clamped to the first/last keyframe outside the track
    /// span, linear interpolation of position and scale plus slerp of rotation
    /// between the bracketing keyframes inside it.
    pub fn sample(&self, t: f64) -> Pose {
        let first = self.keyframes.first().expect("track is non-empty");
        let last = self.keyframes.last().expect("track is non-empty");
        if t <= first.t_offset {
            return first.pose;
        }
        if t >= last.t_offset {
            return last.pose;
        }
        let hi = self.keyframes.partition_point(|k| k.t_offset < t);
        let b = &self.keyframes[hi];
        let a = &self.keyframes[hi - 1];
        if t == b.t_offset {
            return b.pose;
        }
        let u = (t - a.t_offset) / (b.t_offset - a.t_offset);
        let lerp = |p: Vec3, q: Vec3| p + (q - p).scaled(u);
        Pose {
            position: lerp(a.pose.position, b.pose.position),
            rotation: a
                .pose
                .rotation
                .slerp(b.pose.rotation, u)
                .expect("interpolation parameter is within [0, 1]"),
            scale: lerp(a.pose.scale, b.pose.scale),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-9;

    fn quat_z(angle_deg: f64) -> UnitQuaternion {
        UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), angle_deg.to_radians()).unwrap()
    }

    fn assert_vec3_near(a: Vec3, b: Vec3, tol: f64) {
        assert!((a.x - b.x).abs() <= tol, "{a:?} vs {b:?}");
        assert!((a.y - b.y).abs() <= tol, "{a:?} vs {b:?}");
        assert!((a.z - b.z).abs() <= tol, "{a:?} vs {b:?}");
    }

    fn assert_quat_near(a: UnitQuaternion, mut b: UnitQuaternion, tol: f64) {
        // q and -q denote the same rotation.
        if a.dot(b) < 0.0 {
            b = UnitQuaternion {
                x: -b.x,
                y: -b.y,
                z: -b.z,
                w: -b.w,
            };
        }
        assert!((a.x - b.x).abs() <= tol, "{a:?} vs {b:?}");
        assert!((a.y - b.y).abs() <= tol, "{a:?} vs {b:?}");
        assert!((a.z - b.z).abs() <= tol, "{a:?} vs {b:?}");
        assert!((a.w - b.w).abs() <= tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn mul_identity_left_and_right() {
        let q = quat_z(37.0);
        assert_quat_near(UnitQuaternion::IDENTITY * q, q, EPS);
        assert_quat_near(q * UnitQuaternion::IDENTITY, q, EPS);
    }

    #[test]
    fn mul_two_quarter_turns_about_z() {
        // Axis-angle oracle: 90° + 90° about Z = 180° about Z = (0, 0, 1, 0).
        let q90 = quat_z(90.0);
        let q180 = q90 * q90;
        assert_quat_near(
            q180,
            UnitQuaternion {
                x: 0.0,
                y: 0.0,
                z: 1.0,
                w: 0.0,
            },
            EPS,
        );
    }

    #[test]
    fn rotate_identity_and_zero() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_vec3_near(UnitQuaternion::IDENTITY.rotate(v), v, EPS);
        assert_vec3_near(quat_z(65.0).rotate(Vec3::ZERO), Vec3::ZERO, EPS);
    }

    #[test]
    #[allow(clippy::approx_constant)] // five-digit input mimics external data
    fn rotate_quarter_turn_about_z() {
        // Rotation-matrix oracle: Rz(90°)·(1,0,0)ᵀ = (0,1,0)ᵀ.
        let q = UnitQuaternion::try_new(0.0, 0.0, 0.70711, 0.70711).unwrap();
        assert_vec3_near(
            q.rotate(Vec3::new(1.0, 0.0, 0.0)),
            Vec3::new(0.0, 1.0, 0.0),
            1e-5,
        );
    }

    #[test]
    fn try_new_rejects_far_from_unit() {
        let err = UnitQuaternion::try_new(0.0, 0.0, 0.0, 0.5).unwrap_err();
        assert!(matches!(err, PoseError::NonUnitQuaternion { .. }));
        assert!(UnitQuaternion::try_new(0.0, 0.0, 0.0, 0.9995).is_ok());
        assert!(UnitQuaternion::try_new(0.0, 0.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn renormalized_is_idempotent_bitwise() {
        // A norm offset of 5e-4 forces the division path inside try_new.
        let w = (1.0f64 - (0.01 + 0.04 + 0.09)).sqrt();
        let q =
            UnitQuaternion::try_new(0.1 * 1.0005, 0.2 * 1.0005, 0.3 * 1.0005, w * 1.0005).unwrap();
        assert_eq!(q.renormalized(), q);
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = UnitQuaternion::IDENTITY;
        let b = quat_z(90.0);
        assert_quat_near(a.slerp(b, 0.0).unwrap(), a, EPS);
        assert_quat_near(a.slerp(b, 1.0).unwrap(), b, EPS);
        // Axis-angle oracle: halfway between 0° and 90° about Z is 45° about Z,
        // components (0, 0, sin 22.5°, cos 22.5°) = (0, 0, 0.38268, 0.92388).
        let mid = a.slerp(b, 0.5).unwrap();
        assert_quat_near(
            mid,
            UnitQuaternion {
                x: 0.0,
                y: 0.0,
                z: 0.3826834,
                w: 0.9238795,
            },
            1e-5,
        );
    }

    #[test]
    fn slerp_rejects_out_of_range_parameter() {
        let b = quat_z(10.0);
        assert!(UnitQuaternion::IDENTITY.slerp(b, -0.01).is_err());
        assert!(UnitQuaternion::IDENTITY.slerp(b, 1.01).is_err());
        assert!(UnitQuaternion::IDENTITY.slerp(b, f64::NAN).is_err());
    }

    #[test]
    fn slerp_takes_shortest_arc() {
        let a = quat_z(10.0);
        let b = quat_z(350.0); // same as -10°, shortest arc crosses 0°
        let mid = a.slerp(b, 0.5).unwrap();
        assert!(a.angle_to(mid) <= 20.0f64.to_radians() + 1e-9);
    }

    #[test]
    fn compose_identity_target_is_exact() {
        let p = Pose::new(
            Vec3::new(3.0, -1.0, 2.5),
            quat_z(30.0),
            Vec3::new(2.0, 0.5, 1.5),
        )
        .unwrap();
        assert_eq!(Pose::IDENTITY.compose(&p), p);
    }

    #[test]
    fn compose_translated_rotated_target() {
        // Matrix oracle: T(1,0,0)·Rz(90°) applied to local point (1,0,0)
        // lands at (1,1,0) with the same 90° orientation.
        let target = Pose::new(Vec3::new(1.0, 0.0, 0.0), quat_z(90.0), Vec3::ONE).unwrap();
        let relative = Pose::new(
            Vec3::new(1.0, 0.0, 0.0),
            UnitQuaternion::IDENTITY,
            Vec3::ONE,
        )
        .unwrap();
        let world = target.compose(&relative);
        assert_vec3_near(world.position, Vec3::new(1.0, 1.0, 0.0), 1e-5);
        assert_quat_near(world.rotation, quat_z(90.0), 1e-5);
        assert_vec3_near(world.scale, Vec3::ONE, EPS);
    }

    #[test]
    fn compose_applies_target_scale_to_relative_position() {
        let target = Pose::new(Vec3::ZERO, UnitQuaternion::IDENTITY, Vec3::splat(2.0)).unwrap();
        let relative = Pose::new(
            Vec3::new(1.0, 0.0, 0.0),
            UnitQuaternion::IDENTITY,
            Vec3::ONE,
        )
        .unwrap();
        let world = target.compose(&relative);
        assert_vec3_near(world.position, Vec3::new(2.0, 0.0, 0.0), EPS);
        assert_vec3_near(world.scale, Vec3::splat(2.0), EPS);
    }

    #[test]
    fn pose_new_rejects_bad_scale() {
        assert!(Pose::new(
            Vec3::ZERO,
            UnitQuaternion::IDENTITY,
            Vec3::new(1.0, 0.0, 1.0)
        )
        .is_err());
        assert!(Pose::new(
            Vec3::ZERO,
            UnitQuaternion::IDENTITY,
            Vec3::new(1.0, -2.0, 1.0)
        )
        .is_err());
        assert!(Pose::new(
            Vec3::new(f64::INFINITY, 0.0, 0.0),
            UnitQuaternion::IDENTITY,
            Vec3::ONE
        )
        .is_err());
    }

    #[test]
    fn track_rejects_empty_and_unsorted() {
        assert_eq!(
            KeyframeTrack::new(vec![]).unwrap_err(),
            PoseError::EmptyTrack
        );
        let kf = |t| Keyframe {
            t_offset: t,
            pose: Pose::IDENTITY,
        };
        assert!(KeyframeTrack::new(vec![kf(0.0), kf(0.0)]).is_err());
        assert!(KeyframeTrack::new(vec![kf(1.0), kf(0.5)]).is_err());
        assert!(KeyframeTrack::new(vec![kf(-1.0), kf(0.5)]).is_err());
        assert!(KeyframeTrack::new(vec![kf(0.0), kf(1.0)]).is_ok());
    }

    #[test]
    fn sample_single_keyframe_is_constant() {
        let pose = Pose::new(Vec3::new(5.0, 6.0, 7.0), quat_z(12.0), Vec3::ONE).unwrap();
        let track = KeyframeTrack::new(vec![Keyframe {
            t_offset: 0.0,
            pose,
        }])
        .unwrap();
        for t in [-3.0, 0.0, 0.25, 100.0] {
            assert_eq!(track.sample(t), pose);
        }
    }

    #[test]
    fn sample_hits_keyframes_exactly_and_lerps_between() {
        let p0 = Pose::IDENTITY;
        let p1 = Pose::new(
            Vec3::new(2.0, 0.0, 0.0),
            UnitQuaternion::IDENTITY,
            Vec3::ONE,
        )
        .unwrap();
        let track = KeyframeTrack::new(vec![
            Keyframe {
                t_offset: 0.0,
                pose: p0,
            },
            Keyframe {
                t_offset: 2.0,
                pose: p1,
            },
        ])
        .unwrap();
        assert_eq!(track.sample(0.0), p0);
        assert_eq!(track.sample(2.0), p1);
        // Hand interpolation: halfway in time is halfway in position.
        assert_vec3_near(track.sample(1.0).position, Vec3::new(1.0, 0.0, 0.0), EPS);
        assert_eq!(track.sample(5.0), p1);
    }
}
