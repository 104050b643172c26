use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Args;
use greenseg_core::cloudio::{write_labeled, write_ply};
use greenseg_core::params::transform_to_config_string;
use greenseg_core::simulate::{Scenario, Scene, SceneFrame, ScenePreset, Solar};
use rayon::prelude::*;

#[derive(Args)]
pub struct SimulateArgs {
    /// Scenario preset: central_corridor, crop_rows, end_turn, corridor_change.
    #[arg(long, default_value = "crop_rows")]
    pub preset: Scenario,
    /// Sunlight severity s1 (mild) to s4 (harsh).
    #[arg(long, default_value = "s1")]
    pub solar: Solar,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Robot speed in m/s; 0 keeps the viewpoint fixed.
    #[arg(long, default_value_t = 0.0)]
    pub speed: f64,
    /// Drop ghost points, multipath and glare holes.
    #[arg(long)]
    pub clean: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn frame_stem(k: usize) -> String {
    format!("frame_{k:04}")
}

/// Writes `frame_NNNN.ply` (sensor frame) and `frame_NNNN.truth.txt` (base
/// frame, same point order).
pub fn write_frame(dir: &Path, f: &SceneFrame) -> anyhow::Result<()> {
    let stem = frame_stem(f.frame_index);
    write_ply(dir.join(format!("{stem}.ply")), &f.cloud)?;
    write_labeled(dir.join(format!("{stem}.truth.txt")), &f.truth())?;
    Ok(())
}

pub fn run(args: SimulateArgs) -> anyhow::Result<ExitCode> {
    let mut preset = ScenePreset::new(args.preset, args.solar, args.seed);
    preset.robot_speed = args.speed;
    preset.max_travel_frames = preset.max_travel_frames.max(args.frames);
    if args.clean {
        preset = preset.without_artifacts();
    }
    let scene = Scene::new(preset)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;

    let frames: Vec<SceneFrame> = (0..args.frames).into_par_iter().map(|k| scene.frame(k)).collect();
    let tf = frames.first().map(|f| f.tf).unwrap_or_else(|| scene.frame(0).tf);
    std::fs::write(args.out.join("tf.cfg"), transform_to_config_string(&tf))
        .with_context(|| format!("cannot write tf.cfg in {}", args.out.display()))?;
    for f in &frames {
        write_frame(&args.out, f)?;
        println!(
            "{}: {} points, {} ghosts, {} artifacts",
            frame_stem(f.frame_index),
            f.len(),
            f.ghost_index.len(),
            f.artifact_index.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}
