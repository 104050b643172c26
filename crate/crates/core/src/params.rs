//! Segmentation parameters and their config-file representation.
//!
//! The config file is a flat `key = value` file (TOML syntax). Keys:
//!
//! | key                     | field              | default |
//! |-------------------------|--------------------|---------|
//! | `max_surface_height`    | `h_ground`         | 0.12 m  |
//! | `max_incline`           | `max_incline_deg`  | 30°     |
//! | `robot_height`          | `robot_height`     | 0.5 m   |
//! | `n_neighbors`           | `n_neighbors_min`  | 30      |
//! | `r_neighbors`           | `r_neighbors`      | 0.05 m  |
//! | `rho_min`               | `rho_min`          | 0.90    |
//! | `kappa_max`             | `kappa_max`        | 0.05    |
//! | `r_growing`             | `r_growing`        | 0.05 m  |
//! | `max_distance_filtered` | `max_distance`     | 3.0 m   |
//! | `min_distance_filtered` | `min_distance`     | 0.3 m   |
//! | `plane_iterations`      | `plane_iterations` | 3       |
//! | `noise_kappa_split`     | `noise_kappa_split`| `kappa_max` |
//! | `range_metric`          | `range_metric`     | `"planar"` |
//!
//! Missing keys take their default; unknown keys are rejected.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RigidTransform;

/// How the max-range filter measures distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeMetric {
    /// `sqrt(x² + y²)`, same as the min-distance filter.
    #[default]
    Planar,
    /// `sqrt(x² + y² + z²)`.
    Euclidean,
}

/// Thresholds for the baseline segmenter and the geometric verification stage.
///
/// Lengths are meters, `max_incline_deg` is degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegParams {
    pub h_ground: f64,
    pub max_incline_deg: f64,
    pub robot_height: f64,
    pub n_neighbors_min: usize,
    pub r_neighbors: f64,
    pub rho_min: f64,
    pub kappa_max: f64,
    pub r_growing: f64,
    pub max_distance: f64,
    pub min_distance: f64,
    /// Maximum number of inlier-gather/refit rounds for the global plane.
    pub plane_iterations: usize,
    /// Points dropped by the verification stage become obstacle when their
    /// curvature is at most this value, noise otherwise.
    pub noise_kappa_split: f64,
    pub range_metric: RangeMetric,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            h_ground: 0.12,
            max_incline_deg: 30.0,
            robot_height: 0.5,
            n_neighbors_min: 30,
            r_neighbors: 0.05,
            rho_min: 0.90,
            kappa_max: 0.05,
            r_growing: 0.05,
            max_distance: 3.0,
            min_distance: 0.3,
            plane_iterations: 3,
            noise_kappa_split: 0.05,
            range_metric: RangeMetric::Planar,
        }
    }
}

const KAPPA_UPPER: f64 = 1.0 / 3.0;

impl SegParams {
    pub fn max_incline_rad(&self) -> f64 {
        self.max_incline_deg.to_radians()
    }

    pub fn validate(self) -> Result<Self> {
        validate_params(self)
    }

    pub fn from_config_str(text: &str) -> std::result::Result<Self, String> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| e.message().to_string())?;
        let d = SegParams::default();
        let kappa_max = file.kappa_max.unwrap_or(d.kappa_max);
        let params = SegParams {
            h_ground: file.max_surface_height.unwrap_or(d.h_ground),
            max_incline_deg: file.max_incline.unwrap_or(d.max_incline_deg),
            robot_height: file.robot_height.unwrap_or(d.robot_height),
            n_neighbors_min: file.n_neighbors.unwrap_or(d.n_neighbors_min),
            r_neighbors: file.r_neighbors.unwrap_or(d.r_neighbors),
            rho_min: file.rho_min.unwrap_or(d.rho_min),
            kappa_max,
            r_growing: file.r_growing.unwrap_or(d.r_growing),
            max_distance: file.max_distance_filtered.unwrap_or(d.max_distance),
            min_distance: file.min_distance_filtered.unwrap_or(d.min_distance),
            plane_iterations: file.plane_iterations.unwrap_or(d.plane_iterations),
            noise_kappa_split: file.noise_kappa_split.unwrap_or(kappa_max),
            range_metric: file.range_metric.unwrap_or_default(),
        };
        validate_params(params).map_err(|e| e.to_string())
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text).map_err(|message| Error::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_config_string(&self) -> String {
        let file = ConfigFile {
            max_surface_height: Some(self.h_ground),
            max_incline: Some(self.max_incline_deg),
            robot_height: Some(self.robot_height),
            n_neighbors: Some(self.n_neighbors_min),
            r_neighbors: Some(self.r_neighbors),
            rho_min: Some(self.rho_min),
            kappa_max: Some(self.kappa_max),
            r_growing: Some(self.r_growing),
            max_distance_filtered: Some(self.max_distance),
            min_distance_filtered: Some(self.min_distance),
            plane_iterations: Some(self.plane_iterations),
            noise_kappa_split: Some(self.noise_kappa_split),
            range_metric: Some(self.range_metric),
        };
        toml::to_string(&file).expect("flat config always serializes")
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    max_surface_height: Option<f64>,
    max_incline: Option<f64>,
    robot_height: Option<f64>,
    n_neighbors: Option<usize>,
    r_neighbors: Option<f64>,
    rho_min: Option<f64>,
    kappa_max: Option<f64>,
    r_growing: Option<f64>,
    max_distance_filtered: Option<f64>,
    min_distance_filtered: Option<f64>,
    plane_iterations: Option<usize>,
    noise_kappa_split: Option<f64>,
    range_metric: Option<RangeMetric>,
}

/// Extrinsics file: `translation = [x, y, z]` plus either a row-major
/// `rotation = [[..], [..], [..]]` or `rpy_deg = [roll, pitch, yaw]`.
/// With neither, the rotation is the identity.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformFile {
    translation: Option<[f64; 3]>,
    rotation: Option<[[f64; 3]; 3]>,
    rpy_deg: Option<[f64; 3]>,
}

pub fn transform_from_config_str(text: &str) -> std::result::Result<RigidTransform, String> {
    let file: TransformFile = toml::from_str(text).map_err(|e| e.message().to_string())?;
    let t = Vector3::from(file.translation.unwrap_or_default());
    match (file.rotation, file.rpy_deg) {
        (Some(_), Some(_)) => Err("give either rotation or rpy_deg, not both".into()),
        (Some(r), None) => {
            let m = Matrix3::from_fn(|i, j| r[i][j]);
            RigidTransform::new(m, t).map_err(|e| e.to_string())
        }
        (None, Some([r, p, y])) => {
            let tf = RigidTransform::from_rpy_deg(r, p, y, t);
            RigidTransform::new(*tf.rotation(), t).map_err(|e| e.to_string())
        }
        (None, None) => RigidTransform::new(Matrix3::identity(), t).map_err(|e| e.to_string()),
    }
}

pub fn transform_to_config_string(tf: &RigidTransform) -> String {
    let r = tf.rotation();
    let t = tf.translation();
    let file = TransformFile {
        translation: Some([t.x, t.y, t.z]),
        rotation: Some([0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]])),
        rpy_deg: None,
    };
    toml::to_string(&file).expect("flat config always serializes")
}

pub fn load_transform(path: impl AsRef<Path>) -> Result<RigidTransform> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    transform_from_config_str(&text).map_err(|message| Error::Config {
        path: path.to_path_buf(),
        message,
    })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "{name} must be a positive length, got {v}"
        )))
    }
}

/// Returns `params` unchanged if every range constraint holds, otherwise an
/// error naming the first offending field.
pub fn validate_params(params: SegParams) -> Result<SegParams> {
    let p = &params;
    positive("h_ground", p.h_ground)?;
    if !(p.max_incline_deg > 0.0 && p.max_incline_deg < 90.0) {
        return Err(Error::InvalidParams(format!(
            "max_incline out of (0,90) degrees: {}",
            p.max_incline_deg
        )));
    }
    positive("robot_height", p.robot_height)?;
    if p.n_neighbors_min == 0 {
        return Err(Error::InvalidParams("n_neighbors must be at least 1".into()));
    }
    positive("r_neighbors", p.r_neighbors)?;
    if !(p.rho_min > 0.0 && p.rho_min <= 1.0) {
        return Err(Error::InvalidParams(format!("rho_min out of (0,1]: {}", p.rho_min)));
    }
    if !(p.kappa_max > 0.0 && p.kappa_max <= KAPPA_UPPER) {
        return Err(Error::InvalidParams(format!(
            "kappa_max out of (0,1/3]: {}",
            p.kappa_max
        )));
    }
    positive("r_growing", p.r_growing)?;
    positive("max_distance", p.max_distance)?;
    positive("min_distance", p.min_distance)?;
    if p.min_distance >= p.max_distance {
        return Err(Error::InvalidParams(format!(
            "min_distance ({}) must be below max_distance ({})",
            p.min_distance, p.max_distance
        )));
    }
    if p.plane_iterations == 0 {
        return Err(Error::InvalidParams("plane_iterations must be at least 1".into()));
    }
    if !(p.noise_kappa_split.is_finite() && p.noise_kappa_split >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "noise_kappa_split must be a non-negative number: {}",
            p.noise_kappa_split
        )));
    }
    Ok(params)
}
