//! Fixtures shared by the criterion benches.

use greenseg_core::simulate::{Scenario, Scene, SceneFrame, ScenePreset, Solar};

/// A simulated frame cropped to the `n` points nearest the robot.
pub fn sim_frame(scenario: Scenario, solar: Solar, seed: u64, n: usize) -> SceneFrame {
    let scene = Scene::new(ScenePreset::new(scenario, solar, seed)).expect("preset defaults are valid");
    scene.frame(0).nearest(n, 0.3)
}

/// The 10k-point frame used for the frame-rate target.
pub fn frame_10k() -> SceneFrame {
    sim_frame(Scenario::CropRows, Solar::S3, 0, 10_000)
}
