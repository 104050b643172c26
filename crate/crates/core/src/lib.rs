//! Ground segmentation for robot-mounted RGB-D point clouds.
//!
//! A global plane fit labels each point ground, obstacle, above-robot or
//! noise. The verified variant then checks every ground point against its
//! local surface (normal agreement and curvature) and keeps only the region
//! connected to the ground right in front of the robot.
//!
//! ```
//! use greenseg_core::{greenseg_segment, Point3, PointCloud, RigidTransform, SegParams};
//!
//! let mut pts = Vec::new();
//! for i in 0..200 {
//!     for j in 0..120 {
//!         pts.push(Point3::new(0.4 + i as f64 * 0.005, -0.3 + j as f64 * 0.005, 0.0));
//!     }
//! }
//! let cloud = PointCloud::new(pts, "base_link").unwrap();
//! let seg = greenseg_segment(&cloud, &RigidTransform::identity(), &SegParams::default());
//! assert_eq!(seg.labeled.counts().ground, seg.labeled.len());
//! ```

pub mod cloudio;
pub mod error;
pub mod experiment;
pub mod groundfit;
pub mod gtruth;
pub mod localgeom;
pub mod metrics;
pub mod params;
pub mod preprocess;
pub mod regiongrow;
pub mod simulate;
pub mod types;

pub use error::{Error, Result};
pub use groundfit::{baseline_segment, fit_ground_plane, fit_plane_lsq, FitResult, Segmentation};
pub use params::{RangeMetric, SegParams};
pub use regiongrow::{greenseg_segment, greenseg_segment_traced, GreenSegTrace, Region};
pub use types::{
    planar_radius, LabelCounts, LabeledCloud, Plane, Point3, PointCloud, RigidTransform, SemanticLabel, BASE_FRAME,
};
