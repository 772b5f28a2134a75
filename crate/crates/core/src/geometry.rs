//! Vector, rotation and frame types shared by every stage of the pipeline.
//!
//! Everything here is a small `Copy` value type. Lengths are meters unless a
//! function says otherwise; angles are radians.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating unit vectors and rotations.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("similarity scale {0} is too small to invert")]
    DegenerateScale(f64),
    #[error("vector {0:?} cannot be normalized")]
    ZeroVector([f64; 3]),
    #[error("matrix is not a proper rotation (orthonormality error {ortho:.3e}, det {det})")]
    InvalidRotation { ortho: f64, det: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn splat(v: f64) -> Self {
        Vec3::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn distance_squared(self, o: Vec3) -> f64 {
        (self - o).norm_squared()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalize(self) -> Option<UnitVec3> {
        UnitVec3::new(self).ok()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn abs(self) -> Vec3 {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn max_element(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// A direction with unit Euclidean length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct UnitVec3(Vec3);

impl TryFrom<Vec3> for UnitVec3 {
    type Error = GeometryError;
    fn try_from(v: Vec3) -> Result<Self, GeometryError> {
        UnitVec3::new(v)
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::X);
    pub const Y: UnitVec3 = UnitVec3(Vec3::Y);
    pub const Z: UnitVec3 = UnitVec3(Vec3::Z);

    /// Normalizes `v`. Fails for non-finite input or length below 1e-12.
    pub fn new(v: Vec3) -> Result<Self, GeometryError> {
        if !v.is_finite() {
            return Err(GeometryError::NonFinite("unit vector"));
        }
        let n = v.norm();
        if n < 1e-12 {
            return Err(GeometryError::ZeroVector(v.to_array()));
        }
        Ok(UnitVec3(v / n))
    }

    /// Like [`UnitVec3::new`] but keeps `v` bit-exact when it is already unit
    /// length within 1e-12 (so stored normals survive a file roundtrip).
    pub fn from_stored(v: Vec3) -> Result<Self, GeometryError> {
        if v.is_finite() && (v.norm() - 1.0).abs() <= 1e-12 {
            return Ok(UnitVec3(v));
        }
        UnitVec3::new(v)
    }

    /// Wraps a vector the caller already knows is unit length.
    pub fn new_unchecked(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-6, "not unit: {v:?}");
        UnitVec3(v)
    }

    #[inline]
    pub fn get(self) -> Vec3 {
        self.0
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.0.dot(o)
    }

    pub fn negate(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

/// Proper rotation stored as a row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation3 {
    m: [[f64; 3]; 3],
}

impl Default for Rotation3 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation3 {
    pub const IDENTITY: Rotation3 = Rotation3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Validates that `m` is orthonormal with determinant +1 within `EXACT_TOL`.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        let r = Rotation3 { m };
        let ortho = r.orthonormality_error();
        let det = r.determinant();
        if !ortho.is_finite() || ortho > EXACT_TOL || (det - 1.0).abs() > EXACT_TOL {
            return Err(GeometryError::InvalidRotation { ortho, det });
        }
        Ok(r)
    }

    /// Builds the rotation whose columns are the given axes.
    pub fn from_columns(x: Vec3, y: Vec3, z: Vec3) -> Result<Self, GeometryError> {
        Self::from_matrix([[x.x, y.x, z.x], [x.y, y.y, z.y], [x.z, y.z, z.z]])
    }

    /// Right-handed frame from a primary axis and a hint for the second axis
    /// (Gram-Schmidt).
    pub fn from_two_axes(primary: Vec3, secondary_hint: Vec3) -> Result<Self, GeometryError> {
        let x = UnitVec3::new(primary)?.get();
        let y = UnitVec3::new(secondary_hint - x * secondary_hint.dot(x))?.get();
        let z = x.cross(y);
        Self::from_columns(x, y, z)
    }

    pub fn from_axis_angle(axis: UnitVec3, angle: f64) -> Self {
        let a = axis.get();
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation3 {
            m: [
                [t * a.x * a.x + c, t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y],
                [t * a.x * a.y + s * a.z, t * a.y * a.y + c, t * a.y * a.z - s * a.x],
                [t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c],
            ],
        }
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(UnitVec3::X, angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(UnitVec3::Y, angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(UnitVec3::Z, angle)
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn column(&self, c: usize) -> Vec3 {
        Vec3::new(self.m[0][c], self.m[1][c], self.m[2][c])
    }

    pub fn transpose(&self) -> Rotation3 {
        let m = self.m;
        Rotation3 {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn compose(&self, other: &Rotation3) -> Rotation3 {
        let mut m = [[0.0; 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, out) in row.iter_mut().enumerate() {
                *out = (0..3).map(|k| self.m[r][k] * other.m[k][c]).sum();
            }
        }
        Rotation3 { m }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = self.transpose().compose(self);
        let mut err: f64 = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                let target = if r == c { 1.0 } else { 0.0 };
                err = err.max((rtr.m[r][c] - target).abs());
            }
        }
        err
    }
}

/// 7-DoF similarity transform `p ↦ s·(R·p) + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPose {
    pub rotation: Rotation3,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for SimilarityPose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl SimilarityPose {
    pub const IDENTITY: SimilarityPose = SimilarityPose {
        rotation: Rotation3::IDENTITY,
        translation: Vec3::ZERO,
        scale: 1.0,
    };

    pub fn new(rotation: Rotation3, translation: Vec3, scale: f64) -> Result<Self, GeometryError> {
        if !scale.is_finite() || !translation.is_finite() {
            return Err(GeometryError::NonFinite("similarity pose"));
        }
        if scale <= 0.0 {
            return Err(GeometryError::DegenerateScale(scale));
        }
        Ok(SimilarityPose { rotation, translation, scale })
    }

    pub fn rigid(rotation: Rotation3, translation: Vec3) -> Self {
        SimilarityPose { rotation, translation, scale: 1.0 }
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        apply_similarity(self, p)
    }

    /// Rotates (but does not scale or translate) a direction.
    #[inline]
    pub fn apply_direction(&self, d: Vec3) -> Vec3 {
        self.rotation.apply(d)
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        invert_similarity(self)
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &SimilarityPose) -> SimilarityPose {
        SimilarityPose {
            rotation: self.rotation.compose(&inner.rotation),
            translation: self.rotation.apply(inner.translation) * self.scale + self.translation,
            scale: self.scale * inner.scale,
        }
    }
}

/// `s·(R·p) + t`, scale applied after rotation and before translation.
#[inline]
pub fn apply_similarity(pose: &SimilarityPose, p: Vec3) -> Vec3 {
    pose.rotation.apply(p) * pose.scale + pose.translation
}

pub fn invert_similarity(pose: &SimilarityPose) -> Result<SimilarityPose, GeometryError> {
    if !(pose.scale > 1e-12) {
        return Err(GeometryError::DegenerateScale(pose.scale));
    }
    let rt = pose.rotation.transpose();
    let inv_s = 1.0 / pose.scale;
    Ok(SimilarityPose {
        rotation: rt,
        translation: -(rt.apply(pose.translation) * inv_s),
        scale: inv_s,
    })
}

/// `(ẑ × n) × ẑ`, the horizontal component of `n`. Not renormalized; a
/// vertical `n` gives the zero vector.
pub fn horizontal_projection(n: UnitVec3) -> Vec3 {
    Vec3::Z.cross(n.get()).cross(Vec3::Z)
}

/// A rigid frame expressed in the robot base: columns of `axes` are the
/// frame's x, y, z axes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Frame {
    pub origin: Vec3,
    pub axes: Rotation3,
}

impl Frame {
    pub fn new(origin: Vec3, axes: Rotation3) -> Self {
        Frame { origin, axes }
    }

    pub fn to_world(&self, local: Vec3) -> Vec3 {
        self.origin + self.axes.apply(local)
    }

    pub fn to_local(&self, world: Vec3) -> Vec3 {
        self.axes.transpose().apply(world - self.origin)
    }

    /// Pose mapping frame-local coordinates into the parent frame.
    pub fn as_pose(&self) -> SimilarityPose {
        SimilarityPose::rigid(self.axes, self.origin)
    }

    /// Camera-style frame at `eye` looking at `target`: z along the optical
    /// axis, x to the image right, y to the image bottom; `up` fixes the roll.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self, GeometryError> {
        let z = UnitVec3::new(target - eye)?.get();
        let x = UnitVec3::new(z.cross(up))?.get();
        let y = z.cross(x);
        Ok(Frame { origin: eye, axes: Rotation3::from_columns(x, y, z)? })
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        let k = CameraIntrinsics { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics from a horizontal field of view with the principal point at
    /// the image center.
    pub fn from_fov(width: usize, height: usize, hfov: f64) -> Result<Self, GeometryError> {
        let fx = width as f64 / 2.0 / (hfov / 2.0).tan();
        Self::new(fx, fx, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidIntrinsics(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("resolution must be nonzero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) || !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("principal point outside the image");
        }
        Ok(())
    }

    /// Camera-frame point to continuous pixel coordinates; `None` behind the
    /// image plane.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Inverse pinhole for z-depth `d`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, d: f64) -> Vec3 {
        Vec3::new(d * (u - self.cx) / self.fx, d * (v - self.cy) / self.fy, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, SQRT_2};

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).abs().max_element() <= tol
    }

    #[test]
    fn apply_similarity_examples() {
        let id = SimilarityPose::IDENTITY;
        assert_eq!(apply_similarity(&id, Vec3::new(1.0, 2.0, 3.0)), Vec3::new(1.0, 2.0, 3.0));

        let p = SimilarityPose::new(Rotation3::IDENTITY, Vec3::new(0.0, 0.0, 1.0), 2.0).unwrap();
        assert_eq!(apply_similarity(&p, Vec3::splat(1.0)), Vec3::new(2.0, 2.0, 3.0));

        let r = SimilarityPose::rigid(Rotation3::rot_z(FRAC_PI_2), Vec3::ZERO);
        assert!(close(apply_similarity(&r, Vec3::X), Vec3::Y, 1e-12));
    }

    #[test]
    fn invert_examples() {
        let inv = invert_similarity(&SimilarityPose::IDENTITY).unwrap();
        assert!(close(inv.translation, Vec3::ZERO, 0.0));
        assert_eq!(inv.scale, 1.0);

        let p = SimilarityPose::new(Rotation3::IDENTITY, Vec3::new(0.0, 0.0, 1.0), 2.0).unwrap();
        let q = p.inverse().unwrap().apply(p.apply(Vec3::splat(1.0)));
        assert!(close(q, Vec3::splat(1.0), 1e-9));

        let p = SimilarityPose::new(Rotation3::rot_x(FRAC_PI_6), Vec3::X, 0.5).unwrap();
        assert!((p.inverse().unwrap().scale - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn invert_rejects_degenerate_scale() {
        let p = SimilarityPose { scale: 1e-13, ..SimilarityPose::IDENTITY };
        assert!(matches!(invert_similarity(&p), Err(GeometryError::DegenerateScale(_))));
        assert!(SimilarityPose::new(Rotation3::IDENTITY, Vec3::ZERO, 0.0).is_err());
    }

    #[test]
    fn horizontal_projection_examples() {
        let h = horizontal_projection(UnitVec3::new(Vec3::new(-1.0, 0.0, 0.0)).unwrap());
        assert!(close(h, Vec3::new(-1.0, 0.0, 0.0), 1e-15));
        let h = horizontal_projection(UnitVec3::new(Vec3::new(0.0, 0.0, -1.0)).unwrap());
        assert_eq!(h.norm(), 0.0);
        let n = UnitVec3::new(Vec3::new(-SQRT_2 / 2.0, 0.0, -SQRT_2 / 2.0)).unwrap();
        assert!(close(horizontal_projection(n), Vec3::new(-SQRT_2 / 2.0, 0.0, 0.0), 1e-15));
    }

    #[test]
    fn look_at_axes() {
        let f = Frame::look_at(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0), -Vec3::Y).unwrap();
        assert!(f.axes.orthonormality_error() < 1e-12);
        assert!(close(f.axes.column(2), Vec3::Z, 1e-12));
        let p = Vec3::new(0.3, -0.2, 1.5);
        assert!(close(f.to_local(f.to_world(p)), p, 1e-12));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).is_ok());
        assert!(CameraIntrinsics::new(0.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 640.0, 240.0, 640, 480).is_err());
        // the full-resolution Kinect mode must be representable
        assert!(CameraIntrinsics::from_fov(2048, 1536, 90f64.to_radians()).is_ok());
    }

    fn unit_vec() -> impl Strategy<Value = UnitVec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter_map("zero", |(x, y, z)| UnitVec3::new(Vec3::new(x, y, z)).ok())
    }

    fn rotation() -> impl Strategy<Value = Rotation3> {
        (unit_vec(), -3.2f64..3.2).prop_map(|(a, t)| Rotation3::from_axis_angle(a, t))
    }

    proptest! {
        #[test]
        fn horizontal_projection_is_vertical_rejection(n in unit_vec()) {
            let h = horizontal_projection(n);
            let r = n.get() - Vec3::Z * n.get().z;
            prop_assert!(close(h, r, 1e-12));
        }

        #[test]
        fn similarity_roundtrip(r in rotation(), t in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
                                s in 0.05f64..20.0, p in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0)) {
            let pose = SimilarityPose::new(r, Vec3::new(t.0, t.1, t.2), s).unwrap();
            let p = Vec3::new(p.0, p.1, p.2);
            let back = apply_similarity(&invert_similarity(&pose).unwrap(), apply_similarity(&pose, p));
            prop_assert!(close(back, p, 1e-9));
        }

        #[test]
        fn gram_schmidt_is_orthonormal(a in unit_vec(), b in unit_vec()) {
            prop_assume!(a.get().cross(b.get()).norm() > 1e-3);
            let r = Rotation3::from_two_axes(a.get(), b.get()).unwrap();
            prop_assert!(r.orthonormality_error() <= 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-9);
        }
    }
}
