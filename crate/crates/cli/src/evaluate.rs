use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Args;
use greenseg_core::cloudio::read_labeled;
use greenseg_core::gtruth::GroundTruthMap;
use greenseg_core::localgeom::SpatialIndex;
use greenseg_core::metrics::{confusion_voxels, metrics_csv, report_csv, summarize, Confusion};
use greenseg_core::LabeledCloud;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Labeled cloud to score.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference: a voxel ground-truth map or a labeled cloud with per-point truth.
    #[arg(long)]
    pub gt: PathBuf,
    /// Baseline labeled cloud; adds baseline means and improvement rows.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Max distance (m) when matching points against a per-point reference.
    #[arg(long, default_value_t = 1e-4)]
    pub match_tol: f64,
}

pub enum Reference {
    Voxels(GroundTruthMap),
    Points { cloud: LabeledCloud, index: SpatialIndex },
}

impl Reference {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        if GroundTruthMap::sniff(&text) {
            return Ok(Reference::Voxels(GroundTruthMap::parse(&text, path)?));
        }
        let cloud = read_labeled(path)?;
        let index = SpatialIndex::build(cloud.points(), 0.01);
        Ok(Reference::Points { cloud, index })
    }

    pub fn confusion(&self, pred: &LabeledCloud, tol: f64) -> anyhow::Result<Confusion> {
        match self {
            Reference::Voxels(gt) => Ok(confusion_voxels(pred, gt)?),
            Reference::Points { cloud, index } => {
                let mut c = Confusion::default();
                let mut matched = 0;
                for (p, l) in pred.iter() {
                    let mut best: Option<(f64, usize)> = None;
                    index.for_each_within(p, tol, |j| {
                        let d = (cloud.points()[j] - p).norm();
                        if best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, j));
                        }
                    });
                    match best {
                        Some((_, j)) => {
                            matched += 1;
                            c.record(l, cloud.labels()[j]);
                        }
                        None => c.excluded += 1,
                    }
                }
                if matched == 0 {
                    bail!("no predicted point lies within {tol} m of a reference point");
                }
                Ok(c)
            }
        }
    }
}

pub fn run(args: EvaluateArgs) -> anyhow::Result<ExitCode> {
    let reference = Reference::load(&args.gt)?;
    let pred = read_labeled(&args.pred)?;
    let ours = reference.confusion(&pred, args.match_tol)?;
    let ours_m = ours.metrics();
    let csv = match &args.baseline {
        Some(b) => {
            let base = reference.confusion(&read_labeled(b)?, args.match_tol)?;
            report_csv(&ours_m, &summarize(&ours_m, &base.metrics()))
        }
        None => metrics_csv(&ours_m),
    };
    std::fs::write(&args.out, &csv).with_context(|| format!("cannot write {}", args.out.display()))?;
    print!("{csv}");
    println!(
        "# evaluated {} points, {} outside the reference",
        ours.evaluated, ours.excluded
    );
    Ok(ExitCode::SUCCESS)
}
