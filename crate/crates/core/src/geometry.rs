//! Rigid-body frame algebra, pinhole projection and the gaze reprojection chain.
//!
//! Poses carry their source and destination frames so that a chain like
//! `world_T_cam(t_i)^-1 * world_T_cam(t_i+n) * cam_T_pupil` is checked for
//! consistency at every composition step.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Orthonormality error above which an ingested rotation is rejected.
pub const ROTATION_INGEST_TOLERANCE: f64 = 1e-6;

/// Depth below which a point counts as behind (or on) the image plane.
pub const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: FrameId, found: FrameId },
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("rotation is not orthonormal (error {error:.3e})")]
    InvalidRotation { error: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// The coordinate frames used by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameKind {
    #[serde(rename = "r")]
    RobotBase,
    #[serde(rename = "c")]
    RobotCamera,
    #[serde(rename = "gc")]
    GlassesCamera,
    #[serde(rename = "gp")]
    GlassesPupil,
    #[serde(rename = "s")]
    SlamWorld,
}

impl FrameKind {
    pub fn symbol(self) -> &'static str {
        match self {
            FrameKind::RobotBase => "r",
            FrameKind::RobotCamera => "c",
            FrameKind::GlassesCamera => "gc",
            FrameKind::GlassesPupil => "gp",
            FrameKind::SlamWorld => "s",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "r" => FrameKind::RobotBase,
            "c" => FrameKind::RobotCamera,
            "gc" => FrameKind::GlassesCamera,
            "gp" => FrameKind::GlassesPupil,
            "s" => FrameKind::SlamWorld,
            _ => return None,
        })
    }
}

/// A frame, optionally pinned to an instant (the glasses frames move with the head).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameId {
    pub kind: FrameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

impl FrameId {
    pub const fn new(kind: FrameKind) -> Self {
        Self { kind, timestamp: None }
    }

    pub fn at(kind: FrameKind, t: f64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(GeometryError::InvalidFrame(format!(
                "{} timestamp must be finite and non-negative, got {t}",
                kind.symbol()
            )));
        }
        Ok(Self { kind, timestamp: Some(t) })
    }

    /// Pins an untimestamped frame to `t`; timestamped frames are returned unchanged.
    pub fn stamped_or(self, t: Option<f64>) -> Self {
        match self.timestamp {
            Some(_) => self,
            None => Self { kind: self.kind, timestamp: t },
        }
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.timestamp {
            Some(t) => write!(f, "{}@{t}", self.kind.symbol()),
            None => f.write_str(self.kind.symbol()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A rigid transform mapping points expressed in `from_frame` into `to_frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRecord", into = "PoseRecord")]
pub struct Pose {
    from_frame: FrameId,
    to_frame: FrameId,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Largest absolute entry of `R^T R - I`.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

impl Pose {
    /// Builds a pose from a rotation that is already orthonormal to 1e-9.
    pub fn new(
        from_frame: FrameId,
        to_frame: FrameId,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("pose"));
        }
        let error = orthonormality_error(&rotation);
        if error > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidRotation { error });
        }
        Ok(Self { from_frame, to_frame, rotation, translation })
    }

    /// Builds a pose from externally supplied data. Rotations within
    /// [`ROTATION_INGEST_TOLERANCE`] of orthonormal are projected back onto SO(3)
    /// by polar decomposition; anything worse is rejected.
    pub fn ingest(
        from_frame: FrameId,
        to_frame: FrameId,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("pose"));
        }
        let error = orthonormality_error(&rotation);
        if error > ROTATION_INGEST_TOLERANCE || rotation.determinant() <= 0.0 {
            return Err(GeometryError::InvalidRotation { error });
        }
        let rotation = if error > 1e-12 { polar_rotation(&rotation) } else { rotation };
        Self::new(from_frame, to_frame, rotation, translation)
    }

    pub fn identity(frame: FrameId) -> Self {
        Self {
            from_frame: frame,
            to_frame: frame,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_axis_angle(
        from_frame: FrameId,
        to_frame: FrameId,
        axis: Vector3<f64>,
        angle: f64,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let rotation = if axis.norm() == 0.0 || angle == 0.0 {
            Matrix3::identity()
        } else {
            *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
                .matrix()
        };
        Self::ingest(from_frame, to_frame, rotation, translation)
    }

    pub fn from_frame(&self) -> FrameId {
        self.from_frame
    }

    pub fn to_frame(&self) -> FrameId {
        self.to_frame
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Returns the same transform with untimestamped frames pinned to the given instants.
    pub fn stamped(&self, from_t: Option<f64>, to_t: Option<f64>) -> Self {
        Self {
            from_frame: self.from_frame.stamped_or(from_t),
            to_frame: self.to_frame.stamped_or(to_t),
            ..self.clone()
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            from_frame: self.to_frame,
            to_frame: self.from_frame,
            translation: -(rt * self.translation),
            rotation: rt,
        }
    }

    /// `self ∘ other`: maps `other.from_frame` into `self.to_frame`.
    pub fn compose(&self, other: &Pose) -> Result<Self> {
        if self.from_frame != other.to_frame {
            return Err(GeometryError::FrameMismatch {
                expected: self.from_frame,
                found: other.to_frame,
            });
        }
        Ok(Self {
            from_frame: other.from_frame,
            to_frame: self.to_frame,
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        })
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from_vector(&(self.rotation * p.to_vector() + self.translation))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Wire form of a pose: explicit frame names, row-major rotation, translation in meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub from: FrameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_t: Option<f64>,
    pub to: FrameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_t: Option<f64>,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl TryFrom<PoseRecord> for Pose {
    type Error = GeometryError;

    fn try_from(r: PoseRecord) -> Result<Self> {
        let frame = |kind, t: Option<f64>| match t {
            Some(t) => FrameId::at(kind, t),
            None => Ok(FrameId::new(kind)),
        };
        Pose::ingest(
            frame(r.from, r.from_t)?,
            frame(r.to, r.to_t)?,
            Matrix3::from_row_slice(&r.rotation),
            Vector3::from(r.translation),
        )
    }
}

impl From<Pose> for PoseRecord {
    fn from(p: Pose) -> Self {
        let r = &p.rotation;
        PoseRecord {
            from: p.from_frame.kind,
            from_t: p.from_frame.timestamp,
            to: p.to_frame.kind,
            to_t: p.to_frame.timestamp,
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

fn polar_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    u * v_t
}

/// Pinhole intrinsics; lens distortion is not modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite("intrinsics"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if !(0.0..f64::from(self.width)).contains(&self.cx)
            || !(0.0..f64::from(self.height)).contains(&self.cy)
        {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// True when `p` lies in the closed image rectangle `[0, width] x [0, height]`.
    pub fn contains(&self, p: &Point2) -> bool {
        (0.0..=f64::from(self.width)).contains(&p.x) && (0.0..=f64::from(self.height)).contains(&p.y)
    }

    pub fn project(&self, p: &Point3) -> Result<Point2> {
        if !p.is_finite() {
            return Err(GeometryError::NonFinite("point"));
        }
        if p.z <= MIN_DEPTH {
            return Err(GeometryError::BehindCamera { z: p.z });
        }
        Ok(Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn unproject(&self, p: &Point2, depth: f64) -> Point3 {
        Point3::new((p.x - self.cx) / self.fx * depth, (p.y - self.cy) / self.fy * depth, depth)
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Result<Pose> {
    a.compose(b)
}

pub fn transform_point(pose: &Pose, p: &Point3) -> Point3 {
    pose.transform_point(p)
}

pub fn project(k: &Intrinsics, p: &Point3) -> Result<Point2> {
    k.project(p)
}

/// Reprojects a pupil-frame gaze point observed at `t_{i+n}` onto the glasses
/// image captured at `t_i`.
///
/// `world_from_cam_ti` and `world_from_cam_tin` are the head poses at the two
/// instants. An untimestamped `cam_from_pupil` calibration is pinned to the
/// camera frame of `world_from_cam_tin` before chaining.
pub fn reproject_gaze(
    gaze_pupil: &Point3,
    cam_from_pupil: &Pose,
    world_from_cam_ti: &Pose,
    world_from_cam_tin: &Pose,
    k: &Intrinsics,
) -> Result<Point2> {
    let t_in = world_from_cam_tin.from_frame().timestamp;
    let cam_from_pupil = cam_from_pupil.stamped(t_in, t_in);
    let chain = world_from_cam_ti
        .inverse()
        .compose(world_from_cam_tin)?
        .compose(&cam_from_pupil)?;
    k.project(&chain.transform_point(gaze_pupil))
}
