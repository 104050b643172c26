use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use greenseg_core::cloudio::{read_cloud, write_labeled, write_xyz};
use greenseg_core::params::load_transform;
use greenseg_core::{
    baseline_segment, greenseg_segment, LabelCounts, PointCloud, RigidTransform, SegParams, Segmentation, SemanticLabel,
};
use rayon::prelude::*;

use crate::{load_params, EXIT_NO_PLANE};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgoArg {
    Baseline,
    Greenseg,
}

#[derive(Args)]
pub struct SegmentArgs {
    #[arg(long, value_enum, default_value = "greenseg")]
    pub algo: AlgoArg,
    /// Input cloud (ASCII PLY or XYZ), or a directory of them.
    #[arg(long)]
    pub cloud: PathBuf,
    /// Sensor-to-base extrinsics. For a directory, defaults to `tf.cfg` inside it.
    #[arg(long)]
    pub tf: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Labeled output file, or output directory when `--cloud` is a directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Sibling output path: `o.txt` -> `o.<tag>.txt`.
pub fn sibling(out: &Path, tag: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}.txt"),
    };
    out.with_file_name(name)
}

pub fn run_algo(algo: AlgoArg, cloud: &PointCloud, tf: &RigidTransform, params: &SegParams) -> Segmentation {
    match algo {
        AlgoArg::Baseline => baseline_segment(cloud, tf, params),
        AlgoArg::Greenseg => greenseg_segment(cloud, tf, params),
    }
}

fn counts_line(c: &LabelCounts) -> String {
    format!(
        "ground {} obstacle {} above {} noise {}",
        c.ground, c.obstacle, c.above, c.noise
    )
}

/// Cloud files in `dir`, sorted by name.
pub fn cloud_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ply" | "xyz")))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .ply or .xyz files in {}", dir.display());
    }
    Ok(files)
}

pub fn resolve_tf(explicit: Option<&Path>, dir: Option<&Path>) -> anyhow::Result<RigidTransform> {
    if let Some(p) = explicit {
        return Ok(load_transform(p)?);
    }
    if let Some(default) = dir.map(|d| d.join("tf.cfg")).filter(|p| p.is_file()) {
        return Ok(load_transform(default)?);
    }
    Ok(RigidTransform::identity())
}

fn write_outputs(seg: &Segmentation, algo: AlgoArg, out: &Path) -> anyhow::Result<()> {
    write_labeled(out, &seg.labeled)?;
    write_xyz(sibling(out, "obstacle"), &seg.obstacles)?;
    if matches!(algo, AlgoArg::Greenseg) {
        write_xyz(sibling(out, "ground"), &seg.labeled.cloud_of(SemanticLabel::Ground))?;
    }
    Ok(())
}

pub fn run(args: SegmentArgs) -> anyhow::Result<ExitCode> {
    let params = load_params(args.params.as_deref())?;
    let inputs = if args.cloud.is_dir() {
        cloud_files(&args.cloud)?
    } else {
        vec![args.cloud.clone()]
    };
    let batch = args.cloud.is_dir();
    let tf = resolve_tf(args.tf.as_deref(), batch.then_some(args.cloud.as_path()))?;
    if batch {
        std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    }

    let clouds: Vec<PointCloud> = inputs.iter().map(read_cloud).collect::<Result<_, _>>()?;
    let segs: Vec<Segmentation> = clouds
        .par_iter()
        .map(|c| run_algo(args.algo, c, &tf, &params))
        .collect();

    let mut total = LabelCounts::default();
    let mut planes = 0;
    for (input, seg) in inputs.iter().zip(&segs) {
        let out = if batch {
            let stem = input.file_stem().unwrap_or_default().to_string_lossy();
            args.out.join(format!("{stem}.labels.txt"))
        } else {
            args.out.clone()
        };
        write_outputs(seg, args.algo, &out)?;
        let c = seg.labeled.counts();
        let plane = match seg.plane() {
            Some(p) => {
                planes += 1;
                let n = p.normal();
                format!("plane n=({:.4}, {:.4}, {:.4}) d={:.4}", n.x, n.y, n.z, p.offset())
            }
            None => "no plane".to_string(),
        };
        println!("{}: {} ({plane})", input.display(), counts_line(&c));
        total += c;
    }
    if batch {
        println!("total: {}", counts_line(&total));
    }
    if planes == 0 {
        eprintln!("error: no ground plane found in any frame; all points labeled noise");
        return Ok(ExitCode::from(EXIT_NO_PLANE));
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("d/o.txt"), "obstacle"), Path::new("d/o.obstacle.txt"));
        assert_eq!(sibling(Path::new("o"), "ground"), Path::new("o.ground.txt"));
    }
}
