//! Shared domain types: points, clouds, rigid transforms, planes and labels.
//!
//! All types are plain immutable values and are `Send + Sync`.

use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};

/// A 3-D point in meters.
pub type Point3 = nalgebra::Point3<f64>;

/// Frame id of the robot base after [`crate::preprocess::transform_to_base`].
pub const BASE_FRAME: &str = "base_link";

/// Components smaller than this are treated as zero when breaking sign ties.
const SIGN_TIE_EPS: f64 = 1e-12;

pub(crate) fn check_finite(p: &Point3) -> Result<()> {
    if p.x.is_finite() && p.y.is_finite() && p.z.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinitePoint { x: p.x, y: p.y, z: p.z })
    }
}

/// Planar (xy) distance from the frame origin.
#[inline]
pub fn planar_radius(p: &Point3) -> f64 {
    p.x.hypot(p.y)
}

/// Flip `v` so it points toward +z; when z is zero, toward +x, then +y.
pub fn canonicalize_sign(v: Vector3<f64>) -> Vector3<f64> {
    for c in [v.z, v.x, v.y] {
        if c > SIGN_TIE_EPS {
            return v;
        }
        if c < -SIGN_TIE_EPS {
            return -v;
        }
    }
    v
}

/// An ordered set of finite points expressed in a named frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    frame_id: String,
    stamp: Option<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame_id: impl Into<String>) -> Result<Self> {
        let frame_id = frame_id.into();
        if frame_id.is_empty() {
            return Err(Error::EmptyFrameId);
        }
        points.iter().try_for_each(check_finite)?;
        Ok(Self {
            points,
            frame_id,
            stamp: None,
        })
    }

    pub fn with_stamp(mut self, stamp: Option<f64>) -> Self {
        self.stamp = stamp;
        self
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn stamp(&self) -> Option<f64> {
        self.stamp
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sub-cloud holding the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame_id: self.frame_id.clone(),
            stamp: self.stamp,
        }
    }

    // Points produced internally from already-validated points.
    pub(crate) fn from_trusted(points: Vec<Point3>, frame_id: String, stamp: Option<f64>) -> Self {
        debug_assert!(points.iter().all(|p| check_finite(p).is_ok()));
        Self {
            points,
            frame_id,
            stamp,
        }
    }
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Tolerance on orthonormality and determinant of the rotation block.
    pub const ROTATION_TOL: f64 = 1e-9;

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let gram_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if gram_err > Self::ROTATION_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {gram_err:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > Self::ROTATION_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation from roll/pitch/yaw in degrees (applied roll, then pitch, then yaw,
    /// about fixed axes) plus a translation.
    pub fn from_rpy_deg(roll: f64, pitch: f64, yaw: f64, translation: Vector3<f64>) -> Self {
        let r = Rotation3::from_euler_angles(roll.to_radians(), pitch.to_radians(), yaw.to_radians());
        Self {
            rotation: *r.matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Semantic class of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemanticLabel {
    Ground,
    Obstacle,
    Above,
    Noise,
    /// Only used by ground-truth maps; never produced by a segmenter.
    Undefined,
}

impl SemanticLabel {
    /// The four classes a segmenter can emit, in reporting order.
    pub const CLASSES: [SemanticLabel; 4] = [
        SemanticLabel::Ground,
        SemanticLabel::Obstacle,
        SemanticLabel::Above,
        SemanticLabel::Noise,
    ];

    pub fn code(self) -> u8 {
        match self {
            SemanticLabel::Ground => 0,
            SemanticLabel::Obstacle => 1,
            SemanticLabel::Above => 2,
            SemanticLabel::Noise => 3,
            SemanticLabel::Undefined => 255,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SemanticLabel::Ground),
            1 => Some(SemanticLabel::Obstacle),
            2 => Some(SemanticLabel::Above),
            3 => Some(SemanticLabel::Noise),
            255 => Some(SemanticLabel::Undefined),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticLabel::Ground => "ground",
            SemanticLabel::Obstacle => "obstacle",
            SemanticLabel::Above => "above",
            SemanticLabel::Noise => "noise",
            SemanticLabel::Undefined => "undefined",
        }
    }

    /// Position in [`Self::CLASSES`], `None` for `Undefined`.
    pub fn class_index(self) -> Option<usize> {
        match self {
            SemanticLabel::Ground => Some(0),
            SemanticLabel::Obstacle => Some(1),
            SemanticLabel::Above => Some(2),
            SemanticLabel::Noise => Some(3),
            SemanticLabel::Undefined => None,
        }
    }
}

impl fmt::Display for SemanticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-class point tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub ground: usize,
    pub obstacle: usize,
    pub above: usize,
    pub noise: usize,
    pub undefined: usize,
}

impl std::ops::AddAssign for LabelCounts {
    fn add_assign(&mut self, o: Self) {
        self.ground += o.ground;
        self.obstacle += o.obstacle;
        self.above += o.above;
        self.noise += o.noise;
        self.undefined += o.undefined;
    }
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.ground + self.obstacle + self.above + self.noise + self.undefined
    }

    pub fn get(&self, label: SemanticLabel) -> usize {
        match label {
            SemanticLabel::Ground => self.ground,
            SemanticLabel::Obstacle => self.obstacle,
            SemanticLabel::Above => self.above,
            SemanticLabel::Noise => self.noise,
            SemanticLabel::Undefined => self.undefined,
        }
    }

    fn bump(&mut self, label: SemanticLabel) {
        match label {
            SemanticLabel::Ground => self.ground += 1,
            SemanticLabel::Obstacle => self.obstacle += 1,
            SemanticLabel::Above => self.above += 1,
            SemanticLabel::Noise => self.noise += 1,
            SemanticLabel::Undefined => self.undefined += 1,
        }
    }
}

impl fmt::Display for LabelCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ground={} obstacle={} above={} noise={}",
            self.ground, self.obstacle, self.above, self.noise
        )?;
        if self.undefined > 0 {
            write!(f, " undefined={}", self.undefined)?;
        }
        Ok(())
    }
}

/// Points paired one-to-one with semantic labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    points: Vec<Point3>,
    labels: Vec<SemanticLabel>,
    frame_id: String,
    stamp: Option<f64>,
}

impl LabeledCloud {
    pub fn new(
        points: Vec<Point3>,
        labels: Vec<SemanticLabel>,
        frame_id: impl Into<String>,
        stamp: Option<f64>,
    ) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::InvalidParams(format!(
                "labeled cloud has {} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let cloud = PointCloud::new(points, frame_id)?.with_stamp(stamp);
        Ok(Self::from_cloud(cloud, labels))
    }

    /// Pairs every point of `cloud` with the label at the same position.
    ///
    /// Panics if the lengths differ.
    pub fn from_cloud(cloud: PointCloud, labels: Vec<SemanticLabel>) -> Self {
        assert_eq!(cloud.len(), labels.len(), "one label per point");
        Self {
            points: cloud.points,
            labels,
            frame_id: cloud.frame_id,
            stamp: cloud.stamp,
        }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn labels(&self) -> &[SemanticLabel] {
        &self.labels
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn stamp(&self) -> Option<f64> {
        self.stamp
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point3, SemanticLabel)> + '_ {
        self.points.iter().zip(self.labels.iter().copied())
    }

    pub fn counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for &l in &self.labels {
            c.bump(l);
        }
        c
    }

    /// Indices of the points carrying `label`.
    pub fn indices_of(&self, label: SemanticLabel) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }

    /// The points carrying `label`, as a cloud in the same frame.
    pub fn cloud_of(&self, label: SemanticLabel) -> PointCloud {
        let points = self.iter().filter_map(|(p, l)| (l == label).then_some(*p)).collect();
        PointCloud::from_trusted(points, self.frame_id.clone(), self.stamp)
    }

    /// The obstacle cloud published next to the labeled cloud.
    pub fn obstacle_cloud(&self) -> PointCloud {
        self.cloud_of(SemanticLabel::Obstacle)
    }

    /// The unlabeled cloud.
    pub fn to_cloud(&self) -> PointCloud {
        PointCloud::from_trusted(self.points.clone(), self.frame_id.clone(), self.stamp)
    }

    pub fn with_labels(&self, labels: Vec<SemanticLabel>) -> Self {
        assert_eq!(labels.len(), self.points.len(), "one label per point");
        Self {
            points: self.points.clone(),
            labels,
            frame_id: self.frame_id.clone(),
            stamp: self.stamp,
        }
    }
}

/// Plane `n·p + d = 0` with unit normal, canonicalized so that `n.z >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: Vector3<f64>,
    offset: f64,
}

impl Plane {
    /// Normalizes `(normal, offset)` jointly and canonicalizes the sign.
    pub fn new(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if !norm.is_finite() || norm == 0.0 || !offset.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "plane normal must be finite and non-zero, got {normal:?}"
            )));
        }
        let (n, d) = (normal / norm, offset / norm);
        let c = canonicalize_sign(n);
        let d = if c == n { d } else { -d };
        Ok(Self { normal: c, offset: d })
    }

    /// The plane `z = 0`.
    pub fn horizontal() -> Self {
        Self {
            normal: Vector3::z(),
            offset: 0.0,
        }
    }

    /// Plane with unit normal `normal` passing through `point`.
    pub fn through(point: &Point3, normal: Vector3<f64>) -> Result<Self> {
        let n = normal.normalize();
        Self::new(n, -n.dot(&point.coords))
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    #[inline]
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) + self.offset
    }

    /// Angle between the normal and +z, radians.
    pub fn inclination(&self) -> f64 {
        self.normal.z.clamp(-1.0, 1.0).acos()
    }

    /// Angle between two plane normals, radians, ignoring orientation.
    pub fn angle_to(&self, other: &Plane) -> f64 {
        self.normal.dot(&other.normal).abs().min(1.0).acos()
    }
}

/// Signed perpendicular distance `n̂ᵀp + d̂`.
#[inline]
pub fn signed_distance(plane: &Plane, p: &Point3) -> f64 {
    plane.signed_distance(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cloud_rejects_nan_and_empty_frame() {
        let bad = vec![Point3::new(0.0, f64::NAN, 0.0)];
        assert!(matches!(PointCloud::new(bad, "cam"), Err(Error::NonFinitePoint { .. })));
        assert!(matches!(PointCloud::new(vec![], ""), Err(Error::EmptyFrameId)));
    }

    #[test]
    fn transform_validation() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0;
        // reflection: orthonormal but det = -1
        assert!(RigidTransform::new(r, Vector3::zeros()).is_err());
        let scaled = Matrix3::identity() * 1.01;
        assert!(RigidTransform::new(scaled, Vector3::zeros()).is_err());
        let tf = RigidTransform::from_rpy_deg(10.0, -20.0, 35.0, Vector3::new(1.0, 2.0, 3.0));
        assert!(RigidTransform::new(*tf.rotation(), *tf.translation()).is_ok());
    }

    #[test]
    fn transform_inverse_roundtrip() {
        let tf = RigidTransform::from_rpy_deg(3.0, 30.0, -90.0, Vector3::new(0.4, 0.0, 0.5));
        let p = Point3::new(1.0, -2.0, 0.25);
        let back = tf.inverse().apply(&tf.apply(&p));
        assert_abs_diff_eq!(back, p, epsilon = 1e-12);
        let id = tf.compose(&tf.inverse());
        assert_abs_diff_eq!(*id.rotation(), Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn plane_sign_is_canonical() {
        let p = Plane::new(Vector3::new(0.0, 0.0, -2.0), 0.4).unwrap();
        assert_eq!(*p.normal(), Vector3::z());
        assert_abs_diff_eq!(p.offset(), -0.2, epsilon = 1e-15);
        // vertical plane: tie broken toward +x
        let v = Plane::new(Vector3::new(-1.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(*v.normal(), Vector3::x());
        assert_abs_diff_eq!(v.offset(), -1.0);
        assert!(Plane::new(Vector3::zeros(), 0.0).is_err());
    }

    #[test]
    fn signed_distance_examples() {
        let flat = Plane::horizontal();
        assert_abs_diff_eq!(
            signed_distance(&flat, &Point3::new(1.0, 2.0, 0.05)),
            0.05,
            epsilon = 1e-15
        );
        let lowered = Plane::new(Vector3::z(), -0.1).unwrap();
        assert_abs_diff_eq!(
            signed_distance(&lowered, &Point3::new(0.0, 0.0, 0.1)),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn signed_distance_on_slope_matches_projection() {
        let plane = Plane::through(&Point3::origin(), Vector3::new(-0.02, 0.0, 1.0)).unwrap();
        let p = Point3::new(1.0, 0.0, 0.0);
        let got = plane.signed_distance(&p);
        // projection oracle: foot of perpendicular, then signed length along n
        let n = Vector3::new(-0.02, 0.0, 1.0).normalize();
        let foot = p - n * n.dot(&p.coords);
        assert_abs_diff_eq!(n.dot(&foot.coords), 0.0, epsilon = 1e-15);
        let oracle = (p - foot).dot(&n);
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(got, -0.02 / 1.0004f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(got, -0.019996, epsilon = 1e-6);
    }

    #[test]
    fn label_codes_roundtrip() {
        for l in SemanticLabel::CLASSES.into_iter().chain([SemanticLabel::Undefined]) {
            assert_eq!(SemanticLabel::from_code(l.code()), Some(l));
        }
        assert_eq!(SemanticLabel::from_code(4), None);
    }

    #[test]
    fn labeled_cloud_counts_and_obstacles() {
        use SemanticLabel::*;
        let pts: Vec<_> = (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let lc = LabeledCloud::new(pts, vec![Ground, Obstacle, Obstacle, Above, Noise], "base_link", None).unwrap();
        let c = lc.counts();
        assert_eq!((c.ground, c.obstacle, c.above, c.noise), (1, 2, 1, 1));
        assert_eq!(c.total(), 5);
        let obs = lc.obstacle_cloud();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs.points()[0].x, 1.0);
    }
}
