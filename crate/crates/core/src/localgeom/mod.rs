//! Per-point local surface analysis: neighborhood covariance, PCA normal,
//! normal consistency against the global plane, and curvature.

mod index;

use std::collections::BTreeMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

pub use index::{build_index, within_radius, SpatialIndex, DEFAULT_CELL_SIZE};

use crate::params::SegParams;
use crate::types::{canonicalize_sign, LabeledCloud, Plane, Point3, SemanticLabel};

/// Local PCA summary of a point's neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSurface {
    /// Unit eigenvector of the smallest covariance eigenvalue, `z >= 0`.
    pub normal: Vector3<f64>,
    /// `λ_min / (λ1 + λ2 + λ3)`, in `[0, 1/3]`.
    pub curvature: f64,
    pub neighbor_count: usize,
    /// `|m̂ · n̂|` against the global plane normal.
    pub rho: f64,
}

/// Population covariance `1/|N| Σ (p - p̄)(p - p̄)ᵀ` of a non-empty point set.
pub fn local_covariance(neighbors: &[Point3]) -> Matrix3<f64> {
    assert!(!neighbors.is_empty(), "covariance of an empty neighborhood");
    let n = neighbors.len() as f64;
    let centroid = neighbors.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut c = Matrix3::zeros();
    for p in neighbors {
        let d = p.coords - centroid;
        c += d * d.transpose();
    }
    c / n
}

/// Covariance of `points[i]` for `i` in `indices`, without collecting them.
pub(crate) fn covariance_of(points: &[Point3], indices: &[usize]) -> Matrix3<f64> {
    let n = indices.len() as f64;
    let centroid = indices.iter().fold(Vector3::zeros(), |acc, &i| acc + points[i].coords) / n;
    let mut c = Matrix3::zeros();
    for &i in indices {
        let d = points[i].coords - centroid;
        c += d * d.transpose();
    }
    c / n
}

/// Eigen-decomposition of a symmetric 3×3 matrix.
///
/// Returns eigenvalues in descending order (clamped at zero) and the unit
/// eigenvector of the smallest one, sign-canonicalized toward +z, then +x, +y.
pub(crate) fn min_eigen(c: &Matrix3<f64>) -> ([f64; 3], Vector3<f64>) {
    let eig = SymmetricEigen::new(*c);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.map(|k| eig.eigenvalues[k].max(0.0));
    let v = eig.eigenvectors.column(order[2]).into_owned().normalize();
    (vals, canonicalize_sign(v))
}

/// Unit normal and curvature `κ = λ_min / tr(C)` of a covariance matrix.
///
/// A zero-trace matrix (single-point neighborhood) yields `((0,0,1), 0)`.
pub fn normal_and_curvature(c: &Matrix3<f64>) -> (Vector3<f64>, f64) {
    let (vals, normal) = min_eigen(c);
    let trace: f64 = vals.iter().sum();
    if trace.is_nan() || trace <= 0.0 {
        return (Vector3::z(), 0.0);
    }
    (normal, (vals[2] / trace).clamp(0.0, 1.0 / 3.0))
}

/// Absolute cosine similarity of two unit normals.
#[inline]
pub fn consistency_score(local: &Vector3<f64>, global: &Vector3<f64>) -> f64 {
    local.dot(global).abs().min(1.0)
}

/// Output of [`geometric_filter`]. Indices refer to the labeled cloud.
#[derive(Debug, Clone, Default)]
pub struct GeometricFilter {
    /// Ground points passing the normal-consistency and curvature checks, ascending.
    pub candidates: Vec<usize>,
    /// Surface of each candidate, parallel to `candidates`.
    pub surfaces: Vec<LocalSurface>,
    /// Ground points passing the normal-consistency check alone, ascending.
    pub rho_passed: Vec<usize>,
    /// Ground points dropped here, with their new label.
    pub reclassified: BTreeMap<usize, SemanticLabel>,
}

impl GeometricFilter {
    pub fn candidate_points(&self, labeled: &LabeledCloud) -> Vec<Point3> {
        self.candidates.iter().map(|&i| labeled.points()[i]).collect()
    }
}

/// Label for a ground point rejected by the verification stage.
#[inline]
pub fn demoted_label(curvature: f64, params: &SegParams) -> SemanticLabel {
    if curvature <= params.noise_kappa_split {
        SemanticLabel::Obstacle
    } else {
        SemanticLabel::Noise
    }
}

enum Verdict {
    Sparse,
    Rejected(f64),
    RhoOnly(f64),
    Kept(LocalSurface),
}

/// Surface of the point at `query` from its `r`-ball in `index`.
pub fn local_surface(index: &SpatialIndex, query: &Point3, r: f64, plane_normal: &Vector3<f64>) -> LocalSurface {
    let mut neighbors = Vec::with_capacity(64);
    index.for_each_within(query, r, |j| neighbors.push(j));
    surface_from_neighbors(index.points(), &neighbors, plane_normal)
}

fn surface_from_neighbors(points: &[Point3], neighbors: &[usize], plane_normal: &Vector3<f64>) -> LocalSurface {
    let (normal, curvature) = normal_and_curvature(&covariance_of(points, neighbors));
    LocalSurface {
        normal,
        curvature,
        neighbor_count: neighbors.len(),
        rho: consistency_score(&normal, plane_normal),
    }
}

/// Runs the neighbor-count, normal-consistency and curvature checks over the
/// ground points of `labeled`.
///
/// `index` must be built over all points of `labeled`, so that neighborhoods
/// see non-ground points too.
pub fn geometric_filter(
    labeled: &LabeledCloud,
    plane: &Plane,
    index: &SpatialIndex,
    params: &SegParams,
) -> GeometricFilter {
    debug_assert_eq!(index.len(), labeled.len());
    let ground = labeled.indices_of(SemanticLabel::Ground);
    let n_hat = *plane.normal();
    let verdicts: Vec<Verdict> = ground
        .par_iter()
        .map_init(
            || Vec::with_capacity(128),
            |neighbors, &i| {
                neighbors.clear();
                index.for_each_within(&labeled.points()[i], params.r_neighbors, |j| neighbors.push(j));
                if neighbors.len() < params.n_neighbors_min {
                    return Verdict::Sparse;
                }
                let s = surface_from_neighbors(index.points(), neighbors, &n_hat);
                if s.rho < params.rho_min {
                    Verdict::Rejected(s.curvature)
                } else if s.curvature > params.kappa_max {
                    Verdict::RhoOnly(s.curvature)
                } else {
                    Verdict::Kept(s)
                }
            },
        )
        .collect();

    let mut out = GeometricFilter::default();
    for (&i, v) in ground.iter().zip(verdicts) {
        match v {
            Verdict::Sparse => {
                out.reclassified.insert(i, SemanticLabel::Noise);
            }
            Verdict::Rejected(kappa) => {
                out.reclassified.insert(i, demoted_label(kappa, params));
            }
            Verdict::RhoOnly(kappa) => {
                out.rho_passed.push(i);
                out.reclassified.insert(i, demoted_label(kappa, params));
            }
            Verdict::Kept(s) => {
                out.rho_passed.push(i);
                out.candidates.push(i);
                out.surfaces.push(s);
            }
        }
    }
    out
}
