//! Baseline ground-plane-fitting segmenter.
//!
//! The global plane is seeded with the base-frame horizontal plane `z = 0`,
//! then refined by gathering the points within `h_ground` of the current plane
//! and refitting them by total least squares. Every valid point is then
//! labeled ground / obstacle / above / noise against that single plane.

use crate::error::{Error, Result};
use crate::localgeom::{local_covariance, min_eigen};
use crate::params::SegParams;
use crate::preprocess::prepare;
use crate::types::{LabeledCloud, Plane, Point3, PointCloud, RigidTransform, SemanticLabel};

/// Refinement stops once the normal moves less than this between rounds.
const CONVERGED_ANGLE_DEG: f64 = 0.1;

/// Relative eigenvalue gap below which a point set counts as rank-deficient.
const RANK_TOL: f64 = 1e-12;

/// Global plane estimate and the points supporting it.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub plane: Plane,
    /// Points within `h_ground` of `plane`, ascending.
    pub inliers: Vec<usize>,
    /// RMS signed distance of `inliers` to `plane`.
    pub rms_residual: f64,
    pub iterations_used: usize,
    /// RMS residual of each refit over the inliers it was fitted to.
    pub rms_history: Vec<f64>,
}

/// Total-least-squares plane: normal is the smallest-eigenvalue eigenvector of
/// the centered covariance, offset is `-n̂ᵀ p̄`.
pub fn fit_plane_lsq(points: &[Point3]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "plane fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let c = local_covariance(points);
    let (vals, normal) = min_eigen(&c);
    if vals[0].is_nan() || vals[0] <= 0.0 || vals[1] <= RANK_TOL * vals[0] {
        return Err(Error::DegenerateInput("points are collinear or coincident".into()));
    }
    let centroid = points.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords) / points.len() as f64;
    Plane::new(normal, -normal.dot(&centroid))
}

fn band(points: &[Point3], plane: &Plane, h: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| (plane.signed_distance(p).abs() <= h).then_some(i))
        .collect()
}

fn rms(points: &[Point3], idx: &[usize], plane: &Plane) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let ss: f64 = idx.iter().map(|&i| plane.signed_distance(&points[i]).powi(2)).sum();
    (ss / idx.len() as f64).sqrt()
}

/// Iteratively refined global ground plane, starting from `z = 0`.
///
/// Fails with [`Error::PlaneNotFound`] if the first round finds fewer than 3
/// non-degenerate points in the ground band.
pub fn fit_ground_plane(points: &[Point3], params: &SegParams) -> Result<FitResult> {
    let mut plane = Plane::horizontal();
    let mut history = Vec::new();
    let mut fitted = false;
    let mut iterations = 0;
    for _ in 0..params.plane_iterations {
        let inliers = band(points, &plane, params.h_ground);
        if inliers.len() < 3 {
            break;
        }
        let support: Vec<Point3> = inliers.iter().map(|&i| points[i]).collect();
        let Ok(next) = fit_plane_lsq(&support) else {
            break;
        };
        history.push(rms(points, &inliers, &next));
        let moved = next.angle_to(&plane).to_degrees();
        plane = next;
        fitted = true;
        iterations += 1;
        if moved < CONVERGED_ANGLE_DEG {
            break;
        }
    }
    if !fitted {
        return Err(Error::PlaneNotFound);
    }
    let inliers = band(points, &plane, params.h_ground);
    Ok(FitResult {
        rms_residual: rms(points, &inliers, &plane),
        plane,
        inliers,
        iterations_used: iterations,
        rms_history: history,
    })
}

/// Labels one point against the global plane.
#[inline]
pub fn classify_point(p: &Point3, plane: &Plane, plane_level: bool, params: &SegParams) -> SemanticLabel {
    if plane_level && plane.signed_distance(p).abs() <= params.h_ground {
        SemanticLabel::Ground
    } else if p.z > params.h_ground && p.z <= params.robot_height {
        SemanticLabel::Obstacle
    } else if p.z > params.robot_height {
        SemanticLabel::Above
    } else {
        SemanticLabel::Noise
    }
}

/// Four-class labeling of every point against a single fitted plane.
///
/// A plane inclined more than `max_incline` yields no ground at all.
pub fn classify_points(cloud: &PointCloud, plane: &Plane, params: &SegParams) -> LabeledCloud {
    let level = plane.inclination() <= params.max_incline_rad();
    let labels = cloud
        .points()
        .iter()
        .map(|p| classify_point(p, plane, level, params))
        .collect();
    LabeledCloud::from_cloud(cloud.clone(), labels)
}

/// Result of segmenting one frame.
#[derive(Debug, Clone)]
pub struct Segmentation {
    /// Labels of the valid (transformed and range-filtered) points.
    pub labeled: LabeledCloud,
    /// The obstacle-labeled points of `labeled`.
    pub obstacles: PointCloud,
    /// For each point of `labeled`, its index in the input cloud.
    pub source_indices: Vec<usize>,
    /// `None` when no ground plane was found; the frame is then all noise.
    pub fit: Option<FitResult>,
}

impl Segmentation {
    pub fn plane(&self) -> Option<&Plane> {
        self.fit.as_ref().map(|f| &f.plane)
    }

    pub fn plane_found(&self) -> bool {
        self.fit.is_some()
    }

    pub(crate) fn new(labeled: LabeledCloud, source_indices: Vec<usize>, fit: Option<FitResult>) -> Self {
        Self {
            obstacles: labeled.obstacle_cloud(),
            labeled,
            source_indices,
            fit,
        }
    }

    /// Labels scattered back onto the input cloud; filtered-out points get `None`.
    pub fn labels_by_source(&self, input_len: usize) -> Vec<Option<SemanticLabel>> {
        let mut out = vec![None; input_len];
        for (&src, &l) in self.source_indices.iter().zip(self.labeled.labels()) {
            out[src] = Some(l);
        }
        out
    }
}

/// Baseline segmentation of an already transformed and filtered cloud.
pub fn segment_valid(valid: PointCloud, source_indices: Vec<usize>, params: &SegParams) -> Segmentation {
    match fit_ground_plane(valid.points(), params) {
        Ok(fit) => {
            let labeled = classify_points(&valid, &fit.plane, params);
            Segmentation::new(labeled, source_indices, Some(fit))
        }
        Err(_) => {
            let labels = vec![SemanticLabel::Noise; valid.len()];
            Segmentation::new(LabeledCloud::from_cloud(valid, labels), source_indices, None)
        }
    }
}

/// Transform, filter, fit and label one frame.
pub fn baseline_segment(cloud: &PointCloud, tf: &RigidTransform, params: &SegParams) -> Segmentation {
    let prepared = prepare(cloud, tf, params);
    segment_valid(prepared.valid, prepared.source_indices, params)
}
