//! Seeded region growing over the verified ground candidates, and the full
//! two-stage segmenter built on it.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::groundfit::{segment_valid, Segmentation};
use crate::localgeom::{demoted_label, geometric_filter, GeometricFilter, LocalSurface, SpatialIndex};
use crate::params::SegParams;
use crate::preprocess::prepare;
use crate::types::{planar_radius, LabeledCloud, Plane, Point3, PointCloud, RigidTransform, SemanticLabel};

/// Connected ground region. Indices refer to the candidate set it was grown on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Ascending.
    pub members: Vec<usize>,
    pub seed: usize,
}

impl Region {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }
}

/// Candidate closest to the robot in the xy plane; ties go to the lower index.
pub fn select_seed(candidates: &[Point3]) -> Result<usize> {
    candidates
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| planar_radius(a).total_cmp(&planar_radius(b)).then(i.cmp(j)))
        .map(|(i, _)| i)
        .ok_or(Error::EmptyCandidates)
}

/// Breadth-first growth from `seed` through candidates that lie within
/// `h_ground` of `plane`, have `rho >= rho_min`, and are within `r_growing`
/// of a point already in the region.
///
/// The result is the seed's connected component in that graph, so it does
/// not depend on candidate order. `surfaces` is parallel to `candidates`.
pub fn grow_region(
    candidates: &[Point3],
    surfaces: &[LocalSurface],
    plane: &Plane,
    seed: usize,
    params: &SegParams,
) -> Region {
    assert_eq!(
        candidates.len(),
        surfaces.len(),
        "surfaces must be parallel to candidates"
    );
    assert!(seed < candidates.len(), "seed out of range");
    let admissible =
        |j: usize| plane.signed_distance(&candidates[j]).abs() <= params.h_ground && surfaces[j].rho >= params.rho_min;
    if !admissible(seed) {
        return Region {
            members: vec![seed],
            seed,
        };
    }
    let index = SpatialIndex::build(candidates, params.r_growing);
    let mut visited = vec![false; candidates.len()];
    let mut queue = VecDeque::from([seed]);
    visited[seed] = true;
    let mut members = Vec::new();
    while let Some(i) = queue.pop_front() {
        members.push(i);
        index.for_each_within(&candidates[i], params.r_growing, |j| {
            if !visited[j] && admissible(j) {
                visited[j] = true;
                queue.push_back(j);
            }
        });
    }
    members.sort_unstable();
    Region { members, seed }
}

/// Final labels after verification.
///
/// Region members stay ground. Other baseline ground points take the label
/// assigned by the geometric filter, or the curvature split if they were only
/// cut off by growing. Non-ground labels pass through unchanged. With no
/// region (empty candidate set) the output has no ground at all.
pub fn finalize_labels(
    baseline: &LabeledCloud,
    filter: &GeometricFilter,
    region: Option<&Region>,
    params: &SegParams,
) -> (LabeledCloud, PointCloud) {
    let mut labels = baseline.labels().to_vec();
    for (&i, &l) in &filter.reclassified {
        labels[i] = l;
    }
    for (k, (&i, s)) in filter.candidates.iter().zip(&filter.surfaces).enumerate() {
        let kept = region.is_some_and(|r| r.contains(k));
        labels[i] = if kept {
            SemanticLabel::Ground
        } else {
            demoted_label(s.curvature, params)
        };
    }
    let verified = baseline.with_labels(labels);
    let obstacles = verified.obstacle_cloud();
    (verified, obstacles)
}

/// Intermediate sets of one verified segmentation, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct GreenSegTrace {
    pub baseline: Segmentation,
    pub filter: GeometricFilter,
    /// Region over `filter.candidates`; `None` when there were no candidates.
    pub region: Option<Region>,
}

impl GreenSegTrace {
    /// Indices (into the labeled cloud) of the region members.
    pub fn region_indices(&self) -> Vec<usize> {
        match &self.region {
            Some(r) => r.members.iter().map(|&k| self.filter.candidates[k]).collect(),
            None => Vec::new(),
        }
    }
}

/// Verification stage applied to a finished baseline segmentation.
pub fn verify(baseline: Segmentation, params: &SegParams) -> (Segmentation, GreenSegTrace) {
    let Some(plane) = baseline.plane().copied() else {
        let trace = GreenSegTrace {
            baseline: baseline.clone(),
            filter: GeometricFilter::default(),
            region: None,
        };
        return (baseline, trace);
    };
    let index = SpatialIndex::build(baseline.labeled.points(), params.r_neighbors);
    let filter = geometric_filter(&baseline.labeled, &plane, &index, params);
    let candidates = filter.candidate_points(&baseline.labeled);
    let region = select_seed(&candidates)
        .ok()
        .map(|seed| grow_region(&candidates, &filter.surfaces, &plane, seed, params));
    let (labeled, obstacles) = finalize_labels(&baseline.labeled, &filter, region.as_ref(), params);
    let out = Segmentation {
        labeled,
        obstacles,
        source_indices: baseline.source_indices.clone(),
        fit: baseline.fit.clone(),
    };
    (
        out,
        GreenSegTrace {
            baseline,
            filter,
            region,
        },
    )
}

/// Full pipeline with the intermediate sets.
pub fn greenseg_segment_traced(
    cloud: &PointCloud,
    tf: &RigidTransform,
    params: &SegParams,
) -> (Segmentation, GreenSegTrace) {
    let prepared = prepare(cloud, tf, params);
    verify(segment_valid(prepared.valid, prepared.source_indices, params), params)
}

/// Baseline fit followed by the geometric checks and region growing.
pub fn greenseg_segment(cloud: &PointCloud, tf: &RigidTransform, params: &SegParams) -> Segmentation {
    greenseg_segment_traced(cloud, tf, params).0
}
