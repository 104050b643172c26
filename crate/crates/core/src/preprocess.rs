//! Frame transform into `base_link` and the distance pre-filters.

use std::collections::BTreeMap;

use crate::params::{RangeMetric, SegParams};
use crate::types::{planar_radius, Point3, PointCloud, RigidTransform, BASE_FRAME};

/// Applies `p -> R p + t` to every point and relabels the frame as `base_link`.
pub fn transform_to_base(cloud: &PointCloud, tf: &RigidTransform) -> PointCloud {
    let points = cloud.points().iter().map(|p| tf.apply(p)).collect();
    PointCloud::from_trusted(points, BASE_FRAME.to_string(), cloud.stamp())
}

/// Indices of the points with planar radius `>= d_min`.
pub fn radial_prefilter_indices(cloud: &PointCloud, d_min: f64) -> Vec<usize> {
    keep_indices(cloud, |p| planar_radius(p) >= d_min)
}

/// Drops points closer than `d_min` to the robot in the xy plane (boundary kept).
pub fn radial_prefilter(cloud: &PointCloud, d_min: f64) -> PointCloud {
    cloud.select(&radial_prefilter_indices(cloud, d_min))
}

pub fn range_filter_indices(cloud: &PointCloud, d_max: f64, metric: RangeMetric) -> Vec<usize> {
    match metric {
        RangeMetric::Planar => keep_indices(cloud, |p| planar_radius(p) <= d_max),
        RangeMetric::Euclidean => keep_indices(cloud, |p| p.coords.norm() <= d_max),
    }
}

/// Drops points farther than `d_max` (planar radius; boundary kept).
pub fn range_filter(cloud: &PointCloud, d_max: f64) -> PointCloud {
    range_filter_with(cloud, d_max, RangeMetric::Planar)
}

pub fn range_filter_with(cloud: &PointCloud, d_max: f64, metric: RangeMetric) -> PointCloud {
    cloud.select(&range_filter_indices(cloud, d_max, metric))
}

fn keep_indices(cloud: &PointCloud, keep: impl Fn(&Point3) -> bool) -> Vec<usize> {
    cloud
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| keep(p).then_some(i))
        .collect()
}

/// Result of [`prepare`]: the valid cloud in `base_link` and, for each of its
/// points, the index of the input point it came from.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub valid: PointCloud,
    pub source_indices: Vec<usize>,
}

/// Transform followed by the min-distance and max-range filters.
pub fn prepare(cloud: &PointCloud, tf: &RigidTransform, params: &SegParams) -> Prepared {
    let base = transform_to_base(cloud, tf);
    let source_indices: Vec<usize> = base
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let r = planar_radius(p);
            let far = match params.range_metric {
                RangeMetric::Planar => r,
                RangeMetric::Euclidean => p.coords.norm(),
            };
            (r >= params.min_distance && far <= params.max_distance).then_some(i)
        })
        .collect();
    Prepared {
        valid: base.select(&source_indices),
        source_indices,
    }
}

/// Sensor-to-base transforms keyed by frame stamp, for batch replays.
///
/// Lookup returns the transform with the latest stamp not after the query.
#[derive(Debug, Clone, Default)]
pub struct TransformTable {
    entries: BTreeMap<StampKey, RigidTransform>,
}

#[derive(Debug, Clone, Copy)]
struct StampKey(f64);

impl PartialEq for StampKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for StampKey {}

impl PartialOrd for StampKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StampKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TransformTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, stamp: f64, tf: RigidTransform) {
        self.entries.insert(StampKey(stamp), tf);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, stamp: f64) -> Option<&RigidTransform> {
        self.entries.range(..=StampKey(stamp)).next_back().map(|(_, tf)| tf)
    }
}
