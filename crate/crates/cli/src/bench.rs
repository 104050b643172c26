use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use greenseg_core::cloudio::{read_cloud, read_labeled};
use greenseg_core::experiment::{evaluate_labels, run_trial, FrameEval, Trial};
use greenseg_core::metrics::{report_csv, ClassMetrics, Metric, Report};
use greenseg_core::simulate::{Scenario, Scene, ScenePreset, Solar};
use greenseg_core::{baseline_segment, greenseg_segment, SegParams, SemanticLabel};
use rayon::prelude::*;

use crate::load_params;
use crate::segment::{cloud_files, resolve_tf};

#[derive(Args)]
pub struct BenchArgs {
    /// Scenario preset, or `all`.
    #[arg(long, default_value = "all")]
    pub preset: String,
    /// Solar profile, or `all`.
    #[arg(long, default_value = "all")]
    pub solar: String,
    /// Number of seeds per preset, starting at `--seed`.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frames per seed.
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    /// Average per-frame metrics instead of pooling counts.
    #[arg(long = "macro")]
    pub macro_avg: bool,
    /// Directory of `frame_NNNN.ply` + `frame_NNNN.truth.txt` pairs instead of presets.
    #[arg(long, conflicts_with_all = ["preset", "solar"])]
    pub dir: Option<PathBuf>,
    #[arg(long)]
    pub tf: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output directory for CSV tables and per-frame timings.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the 10k-point throughput measurement.
    #[arg(long)]
    pub no_throughput: bool,
}

fn pick<T: Copy>(arg: &str, all: &[T], parse: impl Fn(&str) -> greenseg_core::Result<T>) -> anyhow::Result<Vec<T>> {
    if arg == "all" {
        Ok(all.to_vec())
    } else {
        Ok(vec![parse(arg)?])
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "   -  ".to_string(), |x| format!("{x:.4}"))
}

/// Aligned text table: per-class base/ours for each metric, then means and improvement.
pub fn text_table(title: &str, ours: &[ClassMetrics; 4], base: &[ClassMetrics; 4], report: &Report) -> String {
    let mut s = format!("== {title} ==\n{:<12}", "class");
    for m in Metric::ALL {
        let _ = write!(s, " {:>17}", format!("{} base/ours", m.name()));
    }
    s.push('\n');
    let mut row = |name: &str, b: &ClassMetrics, o: &ClassMetrics| {
        let _ = write!(s, "{name:<12}");
        for m in Metric::ALL {
            let _ = write!(s, " {:>8}/{:<8}", cell(b.get(m)), cell(o.get(m)));
        }
        s.push('\n');
    };
    for (k, label) in SemanticLabel::CLASSES.iter().enumerate() {
        row(label.name(), &base[k], &ours[k]);
    }
    row("mean", &report.base.mean, &report.ours.mean);
    let _ = write!(s, "{:<12}", "improvement");
    for m in Metric::ALL {
        let v = report
            .improvement_of(m)
            .map_or("-".to_string(), |x| format!("{x:+.2}%"));
        let _ = write!(s, " {v:>17}");
    }
    s.push('\n');
    s
}

fn dir_trial(dir: &Path, tf_path: Option<&Path>, params: &SegParams) -> anyhow::Result<Trial> {
    let tf = resolve_tf(tf_path, Some(dir))?;
    let files = cloud_files(dir)?;
    let frames: Vec<FrameEval> = files
        .par_iter()
        .enumerate()
        .map(|(k, path)| -> anyhow::Result<FrameEval> {
            let cloud = read_cloud(path)?;
            let truth_path = path.with_extension("truth.txt");
            let truth = read_labeled(&truth_path)?;
            if truth.len() != cloud.len() {
                bail!(
                    "{} has {} rows but {} has {} points",
                    truth_path.display(),
                    truth.len(),
                    path.display(),
                    cloud.len()
                );
            }
            let t = Instant::now();
            let b = baseline_segment(&cloud, &tf, params);
            let bs = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let o = greenseg_segment(&cloud, &tf, params);
            let os = t.elapsed().as_secs_f64();
            let ghosts: Vec<usize> = Vec::new();
            Ok(FrameEval {
                seed: 0,
                frame_index: k,
                points: cloud.len(),
                ghosts: 0,
                base: evaluate_labels(&b, truth.labels(), &ghosts, bs),
                ours: evaluate_labels(&o, truth.labels(), &ghosts, os),
            })
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(Trial::from_frames(dir.display().to_string(), frames))
}

/// Frames per second of the verified pipeline on 10k-point crops, one frame
/// per preset, run back to back.
fn throughput(presets: &[(Scenario, Solar)], seed: u64, params: &SegParams) -> anyhow::Result<(usize, f64)> {
    let frames = presets
        .iter()
        .map(|&(sc, so)| {
            Ok(Scene::new(ScenePreset::new(sc, so, seed))?
                .frame(0)
                .nearest(10_000, 0.3))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let _ = greenseg_segment(&frames[0].cloud, &frames[0].tf, params);
    let t = Instant::now();
    for f in &frames {
        let _ = greenseg_segment(&f.cloud, &f.tf, params);
    }
    let fps = frames.len() as f64 / t.elapsed().as_secs_f64();
    Ok((frames.len(), fps))
}

fn file_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

pub fn run(args: BenchArgs) -> anyhow::Result<ExitCode> {
    let params = load_params(args.params.as_deref())?;
    if args.seeds == 0 || args.frames == 0 {
        bail!("--seeds and --frames must be at least 1");
    }
    let mut presets = Vec::new();
    let trials: Vec<Trial> = match &args.dir {
        Some(dir) => vec![dir_trial(dir, args.tf.as_deref(), &params)?],
        None => {
            let scenarios = pick(&args.preset, &Scenario::ALL, str::parse)?;
            let solars = pick(&args.solar, &Solar::ALL, str::parse)?;
            let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
            let mut out = Vec::new();
            for &sc in &scenarios {
                for &so in &solars {
                    presets.push((sc, so));
                    out.push(run_trial(&ScenePreset::new(sc, so, 0), &seeds, args.frames, &params)?);
                }
            }
            out
        }
    };
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    }

    let mut timing = String::from("trial,seed,frame,points,baseline_ms,greenseg_ms\n");
    let (mut frames, mut points, mut secs) = (0usize, 0usize, 0.0f64);
    for t in &trials {
        let ((ours, base), report) = if args.macro_avg {
            (t.macro_(), t.macro_report())
        } else {
            (t.micro(), t.report())
        };
        let avg = if args.macro_avg { "macro" } else { "micro" };
        println!(
            "{}",
            text_table(
                &format!("{} ({} frames, {avg})", t.label, t.frames.len()),
                &ours,
                &base,
                &report
            )
        );
        if let Some(out) = &args.out {
            let path = out.join(format!("{}.csv", file_name(&t.label)));
            std::fs::write(&path, report_csv(&ours, &report))
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        for f in &t.frames {
            let _ = writeln!(
                timing,
                "{},{},{},{},{:.3},{:.3}",
                t.label,
                f.seed,
                f.frame_index,
                f.points,
                f.base.seconds * 1e3,
                f.ours.seconds * 1e3
            );
            frames += 1;
            points += f.points;
            secs += f.ours.seconds;
        }
    }
    if let Some(out) = &args.out {
        let path = out.join("frames.csv");
        std::fs::write(&path, &timing).with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!(
        "greenseg wall time: {:.1} ms/frame over {frames} frames, {:.0} points/s",
        secs * 1e3 / frames as f64,
        points as f64 / secs
    );
    if !args.no_throughput && !presets.is_empty() {
        let (n, fps) = throughput(&presets, args.seed, &params)?;
        println!(
            "throughput on 10k-point frames: {fps:.1} frames/s over {n} frames (target 10, margin {:.2}x)",
            fps / 10.0
        );
    }
    Ok(ExitCode::SUCCESS)
}
