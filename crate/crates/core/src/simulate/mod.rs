//! Synthetic greenhouse scenes with per-point reference labels.
//!
//! A scene is a sloped floor with smooth material-dependent relief, crop
//! rows (planter faces with foliage above), crates and posts. A depth camera
//! on the robot sees the part inside its field of view that is not hidden
//! behind a box. Sunlight artifacts are injected per frame: clusters of
//! spurious returns a few centimeters below the floor, each inside a dropout
//! hole so it is detached from the real floor, extra dropout holes, and deep
//! multipath returns.
//!
//! Geometry is fixed by the preset seed; sensor noise and artifact points are
//! drawn per frame, so frames of a static sequence differ only in noise.

mod layout;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use layout::SurfaceKind;
pub use layout::{Block, Disk, Layout, GHOST_GAP};

use crate::error::{Error, Result};
use crate::preprocess::transform_to_base;
use crate::types::{planar_radius, LabeledCloud, Plane, Point3, PointCloud, RigidTransform, SemanticLabel};

/// Time between frames for moving sequences, seconds.
pub const FRAME_DT: f64 = 0.1;

/// Frame id of generated clouds.
pub const CAMERA_FRAME: &str = "camera_depth_optical_frame";

/// Horizontal and vertical half-angles of the depth field of view, degrees.
const HFOV_HALF_DEG: f64 = 43.5;
const VFOV_HALF_DEG: f64 = 29.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    CentralCorridor,
    CropRows,
    EndTurn,
    CorridorChange,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::CentralCorridor,
        Scenario::CropRows,
        Scenario::EndTurn,
        Scenario::CorridorChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CentralCorridor => "central_corridor",
            Scenario::CropRows => "crop_rows",
            Scenario::EndTurn => "end_turn",
            Scenario::CorridorChange => "corridor_change",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown scenario `{s}`")))
    }
}

/// Sunlight severity, mildest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Solar {
    S1,
    S2,
    S3,
    S4,
}

impl Solar {
    pub const ALL: [Solar; 4] = [Solar::S1, Solar::S2, Solar::S3, Solar::S4];

    pub fn name(self) -> &'static str {
        match self {
            Solar::S1 => "s1",
            Solar::S2 => "s2",
            Solar::S3 => "s3",
            Solar::S4 => "s4",
        }
    }

    pub fn profile(self) -> SolarProfile {
        let (ghost_fraction, ghost_clusters, glare_holes, multipath_fraction) = match self {
            Solar::S1 => (0.01, 1, 0, 0.002),
            Solar::S2 => (0.02, 1, 1, 0.005),
            Solar::S3 => (0.035, 2, 2, 0.01),
            Solar::S4 => (0.05, 2, 3, 0.02),
        };
        SolarProfile {
            ghost_fraction,
            ghost_clusters,
            ghost_radius: 0.1,
            glare_holes,
            multipath_fraction,
        }
    }
}

impl fmt::Display for Solar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Solar::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown solar profile `{s}`")))
    }
}

/// Artifact intensities. Fractions are relative to the real points of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarProfile {
    pub ghost_fraction: f64,
    pub ghost_clusters: usize,
    pub ghost_radius: f64,
    pub glare_holes: usize,
    pub multipath_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Material {
    Concrete,
    Gravel,
    Soil,
}

impl Material {
    /// Standard deviation of the smooth floor relief, meters.
    pub fn relief_amplitude(self) -> f64 {
        match self {
            Material::Concrete => 0.002,
            Material::Gravel => 0.008,
            Material::Soil => 0.015,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenePreset {
    pub scenario: Scenario,
    pub solar: Solar,
    pub profile: SolarProfile,
    /// When false, no ghosts, dropout holes or multipath are generated.
    pub artifacts: bool,
    /// Floor grade along the scene's long axis, percent.
    pub slope_pct: f64,
    pub aisle_width: f64,
    /// Surface sampling pitch, meters.
    pub grid_spacing: f64,
    /// Isotropic Gaussian sensor noise, meters.
    pub sensor_sigma: f64,
    pub view_range: f64,
    /// Forward speed for sequences, m/s; 0 keeps the pose static.
    pub robot_speed: f64,
    /// Longest sequence the sampled geometry must cover while moving.
    pub max_travel_frames: usize,
    /// Downward tilt of the camera, degrees.
    pub camera_pitch_deg: f64,
    /// Height splitting reference obstacle and above labels.
    pub robot_height: f64,
    pub seed: u64,
}

impl ScenePreset {
    pub fn new(scenario: Scenario, solar: Solar, seed: u64) -> Self {
        let (aisle_width, slope_pct) = match scenario {
            Scenario::CentralCorridor => (1.1, 0.5),
            Scenario::CropRows => (1.0, 1.0),
            Scenario::EndTurn => (1.0, 1.5),
            Scenario::CorridorChange => (1.0, 2.0),
        };
        Self {
            scenario,
            solar,
            profile: solar.profile(),
            artifacts: true,
            slope_pct,
            aisle_width,
            grid_spacing: 0.01,
            sensor_sigma: 0.002,
            view_range: 3.2,
            robot_speed: 0.0,
            max_travel_frames: 10,
            camera_pitch_deg: 20.0,
            robot_height: 0.5,
            seed,
        }
    }

    pub fn without_artifacts(mut self) -> Self {
        self.artifacts = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(0.0..=2.0).contains(&self.slope_pct) {
            return bad(format!("slope_pct must be in [0, 2], got {}", self.slope_pct));
        }
        if self.sensor_sigma.is_nan() || self.sensor_sigma < 0.0 {
            return bad(format!("sensor_sigma must be non-negative, got {}", self.sensor_sigma));
        }
        if !(self.grid_spacing >= 0.002 && self.grid_spacing <= 0.2) {
            return bad(format!(
                "grid_spacing must be in [0.002, 0.2], got {}",
                self.grid_spacing
            ));
        }
        if !(self.aisle_width >= 0.8 && self.aisle_width <= 2.0) {
            return bad(format!("aisle_width must be in [0.8, 2.0], got {}", self.aisle_width));
        }
        if !(self.view_range > 0.5 && self.view_range <= 10.0) {
            return bad(format!("view_range must be in (0.5, 10], got {}", self.view_range));
        }
        if !(self.robot_speed >= 0.0 && self.robot_speed <= 2.0) {
            return bad(format!("robot_speed must be in [0, 2], got {}", self.robot_speed));
        }
        if !(self.camera_pitch_deg > 0.0 && self.camera_pitch_deg < 60.0) {
            return bad(format!(
                "camera_pitch_deg must be in (0, 60), got {}",
                self.camera_pitch_deg
            ));
        }
        let p = &self.profile;
        if !(0.0..0.5).contains(&p.ghost_fraction) || !(0.0..0.5).contains(&p.multipath_fraction) {
            return bad("artifact fractions must be in [0, 0.5)".into());
        }
        if !(p.ghost_radius > 0.0 && p.ghost_radius <= 0.3) {
            return bad(format!("ghost_radius must be in (0, 0.3], got {}", p.ghost_radius));
        }
        Ok(())
    }
}

/// Camera-to-base transform: optical axes (x right, y down, z forward) on a
/// mount at (0.4, 0, 0.5) m pitched down by `pitch_deg`.
pub fn camera_mount(pitch_deg: f64) -> RigidTransform {
    let optical = Matrix3::from_columns(&[-Vector3::y(), -Vector3::z(), Vector3::x()]);
    let pitch = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), pitch_deg.to_radians());
    RigidTransform::new(pitch.matrix() * optical, Vector3::new(0.4, 0.0, 0.5)).expect("mount rotation is orthonormal")
}

/// One generated frame.
#[derive(Debug, Clone)]
pub struct SceneFrame {
    /// Points in the camera optical frame.
    pub cloud: PointCloud,
    /// Camera-to-base transform.
    pub tf: RigidTransform,
    /// Reference label of each point of `cloud`.
    pub true_labels: Vec<SemanticLabel>,
    /// Spurious below-floor cluster points, ascending.
    pub ghost_index: Vec<usize>,
    /// All injected artifact points (ghosts and multipath), ascending.
    pub artifact_index: Vec<usize>,
    pub frame_index: usize,
    /// Floor plane without relief, base frame.
    pub true_plane: Plane,
}

impl SceneFrame {
    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// Cloud transformed into the base frame.
    pub fn base_cloud(&self) -> PointCloud {
        transform_to_base(&self.cloud, &self.tf)
    }

    /// Reference labels on the base-frame cloud.
    pub fn truth(&self) -> LabeledCloud {
        LabeledCloud::from_cloud(self.base_cloud(), self.true_labels.clone())
    }

    /// Keeps the `n` points nearest the robot in the plane, among those at
    /// least `min_radius` away; indices stay consistent.
    pub fn nearest(&self, n: usize, min_radius: f64) -> SceneFrame {
        let base = self.base_cloud();
        let mut order: Vec<usize> = (0..base.len())
            .filter(|&i| planar_radius(&base.points()[i]) >= min_radius)
            .collect();
        order.sort_by(|&a, &b| {
            planar_radius(&base.points()[a])
                .total_cmp(&planar_radius(&base.points()[b]))
                .then(a.cmp(&b))
        });
        order.truncate(n);
        order.sort_unstable();
        self.select(&order)
    }

    fn select(&self, keep: &[usize]) -> SceneFrame {
        let mut remap = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let pick = |idx: &[usize]| -> Vec<usize> {
            idx.iter()
                .filter_map(|&i| (remap[i] != usize::MAX).then_some(remap[i]))
                .collect()
        };
        SceneFrame {
            cloud: self.cloud.select(keep),
            tf: self.tf,
            true_labels: keep.iter().map(|&i| self.true_labels[i]).collect(),
            ghost_index: pick(&self.ghost_index),
            artifact_index: pick(&self.artifact_index),
            frame_index: self.frame_index,
            true_plane: self.true_plane,
        }
    }
}

/// A preset with its geometry built, ready to render frames.
#[derive(Debug, Clone)]
pub struct Scene {
    pub preset: ScenePreset,
    pub layout: Layout,
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Scene {
    pub fn new(preset: ScenePreset) -> Result<Self> {
        preset.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(preset.seed, u64::MAX));
        let layout = Layout::build(&preset, &mut rng);
        Ok(Self { preset, layout })
    }

    /// Robot position along the scene's long axis at frame `k`.
    fn robot_x(&self, k: usize) -> f64 {
        self.preset.robot_speed * FRAME_DT * k as f64
    }

    pub fn frame(&self, k: usize) -> SceneFrame {
        let p = &self.preset;
        let lay = &self.layout;
        let tf = camera_mount(p.camera_pitch_deg);
        let cam_from_base = tf.inverse();
        let robot_x = self.robot_x(k);
        let z_ref = lay.plane_height(robot_x);
        let (sy, cy) = lay.yaw.sin_cos();
        let to_base = |q: &Point3| {
            let (dx, dy) = (q.x - robot_x, q.y);
            Point3::new(cy * dx + sy * dy, -sy * dx + cy * dy, q.z - z_ref)
        };
        let cam_b = tf.translation();
        let (cx, cyy) = lay.base_to_scene_xy(cam_b.x, cam_b.y, robot_x);
        let cam_scene = Point3::new(cx, cyy, cam_b.z + z_ref);
        let (tan_h, tan_v) = (HFOV_HALF_DEG.to_radians().tan(), VFOV_HALF_DEG.to_radians().tan());
        let holes = &lay.holes;

        let visible: Vec<(Point3, SemanticLabel)> = lay
            .samples
            .par_iter()
            .filter_map(|s| {
                let b = to_base(&s.p);
                if b.x <= 0.0 || planar_radius(&b) > p.view_range {
                    return None;
                }
                let c = cam_from_base.apply(&b);
                if c.z <= 0.05 || c.x.abs() > c.z * tan_h || c.y.abs() > c.z * tan_v || c.coords.norm() > p.view_range {
                    return None;
                }
                if s.kind == SurfaceKind::Floor && holes.iter().any(|h| h.contains(b.x, b.y)) {
                    return None;
                }
                if lay.occluded(&cam_scene, &s.p) {
                    return None;
                }
                let label = match s.kind {
                    SurfaceKind::Floor => SemanticLabel::Ground,
                    _ if b.z <= p.robot_height => SemanticLabel::Obstacle,
                    _ => SemanticLabel::Above,
                };
                Some((b, label))
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(p.seed, k as u64));
        let noise = Normal::new(0.0, p.sensor_sigma.max(0.0)).expect("finite sigma");
        let mut points: Vec<Point3> = Vec::with_capacity(visible.len() * 11 / 10);
        let mut labels: Vec<SemanticLabel> = Vec::with_capacity(points.capacity());
        for (b, l) in &visible {
            let e = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            points.push(b + e);
            labels.push(*l);
        }
        let n_real = points.len();
        // plane height in base coordinates (no relief)
        let g = p.slope_pct / 100.0;
        let plane_z = |x: f64, y: f64| g * (cy * x - sy * y);

        let mut kinds = vec![0u8; n_real];
        if p.artifacts {
            let clusters = &lay.ghost_clusters;
            let n_ghost = if clusters.is_empty() {
                0
            } else {
                (p.profile.ghost_fraction * n_real as f64).round() as usize
            };
            for i in 0..n_ghost {
                let d = clusters[i % clusters.len()];
                let (r, a) = (
                    d.radius * rng.random::<f64>().sqrt(),
                    rng.random_range(0.0..std::f64::consts::TAU),
                );
                let (x, y) = (d.x + r * a.cos(), d.y + r * a.sin());
                points.push(Point3::new(x, y, plane_z(x, y) - rng.random_range(0.03..0.10)));
                labels.push(SemanticLabel::Noise);
                kinds.push(1);
            }
            let n_multi = (p.profile.multipath_fraction * n_real as f64).round() as usize;
            for _ in 0..n_multi {
                let x = rng.random_range(1.0..2.8);
                let y = rng.random_range(-0.4..0.4);
                points.push(Point3::new(x, y, plane_z(x, y) - rng.random_range(0.15..0.35)));
                labels.push(SemanticLabel::Noise);
                kinds.push(2);
            }
        }

        // sensor order carries no meaning; shuffle so nothing downstream can rely on it
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.shuffle(&mut rng);
        let (mut ghost_index, mut artifact_index) = (Vec::new(), Vec::new());
        for (new, &old) in order.iter().enumerate() {
            if kinds[old] == 1 {
                ghost_index.push(new);
            }
            if kinds[old] != 0 {
                artifact_index.push(new);
            }
        }
        let cam_points: Vec<Point3> = order.iter().map(|&i| cam_from_base.apply(&points[i])).collect();
        let true_labels = order.iter().map(|&i| labels[i]).collect();
        let cloud = PointCloud::new(cam_points, CAMERA_FRAME)
            .expect("generated points are finite")
            .with_stamp(Some(k as f64 * FRAME_DT));
        let true_plane = Plane::new(Vector3::new(-g * cy, g * sy, 1.0), 0.0).expect("non-zero normal");
        SceneFrame {
            cloud,
            tf,
            true_labels,
            ghost_index,
            artifact_index,
            frame_index: k,
            true_plane,
        }
    }
}

/// Renders frame `frame_index` of `preset`.
pub fn generate_frame(preset: &ScenePreset, frame_index: usize) -> Result<SceneFrame> {
    Ok(Scene::new(preset.clone())?.frame(frame_index))
}

/// Renders frames `0..n_frames` sharing one geometry.
pub fn generate_sequence(preset: &ScenePreset, n_frames: usize) -> Result<Vec<SceneFrame>> {
    if n_frames == 0 {
        return Err(Error::InvalidParams("a sequence needs at least one frame".into()));
    }
    let mut preset = preset.clone();
    preset.max_travel_frames = preset.max_travel_frames.max(n_frames);
    let scene = Scene::new(preset)?;
    Ok((0..n_frames).into_par_iter().map(|k| scene.frame(k)).collect())
}
