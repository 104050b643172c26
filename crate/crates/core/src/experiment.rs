//! Side-by-side runs of both segmenters on generated frames.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::groundfit::{baseline_segment, Segmentation};
use crate::metrics::{macro_average, summarize, ClassMetrics, Confusion, Report};
use crate::params::SegParams;
use crate::regiongrow::greenseg_segment;
use crate::simulate::{Scene, SceneFrame, ScenePreset};
use crate::types::SemanticLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Baseline,
    GreenSeg,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Baseline => "baseline",
            Algo::GreenSeg => "greenseg",
        }
    }

    pub fn run(self, frame: &SceneFrame, params: &SegParams) -> Segmentation {
        match self {
            Algo::Baseline => baseline_segment(&frame.cloud, &frame.tf, params),
            Algo::GreenSeg => greenseg_segment(&frame.cloud, &frame.tf, params),
        }
    }
}

/// True if `seg` gives every valid point exactly one real class label.
pub fn is_partition(seg: &Segmentation, input_len: usize) -> bool {
    let n = seg.labeled.len();
    let counts = seg.labeled.counts();
    seg.source_indices.len() == n
        && seg.source_indices.windows(2).all(|w| w[0] < w[1])
        && seg.source_indices.last().is_none_or(|&i| i < input_len)
        && counts.undefined == 0
        && counts.total() == n
}

/// Scores of one algorithm on one frame.
#[derive(Debug, Clone)]
pub struct RunEval {
    pub confusion: Confusion,
    pub seconds: f64,
    pub valid_points: usize,
    pub plane_found: bool,
    pub ghosts_in_ground: usize,
    pub partition_ok: bool,
}

pub fn evaluate_run(frame: &SceneFrame, seg: &Segmentation, seconds: f64) -> RunEval {
    evaluate_labels(seg, &frame.true_labels, &frame.ghost_index, seconds)
}

/// Scores `seg` against per-point truth of its input cloud. `ghosts` indexes
/// input points that must never be ground.
pub fn evaluate_labels(seg: &Segmentation, truth: &[SemanticLabel], ghosts: &[usize], seconds: f64) -> RunEval {
    let mut confusion = Confusion::default();
    for (&src, &l) in seg.source_indices.iter().zip(seg.labeled.labels()) {
        confusion.record(l, truth[src]);
    }
    let by_source = seg.labels_by_source(truth.len());
    RunEval {
        confusion,
        seconds,
        valid_points: seg.labeled.len(),
        plane_found: seg.plane_found(),
        ghosts_in_ground: ghosts
            .iter()
            .filter(|&&i| by_source[i] == Some(SemanticLabel::Ground))
            .count(),
        partition_ok: is_partition(seg, truth.len()),
    }
}

/// Runs and scores one algorithm on one frame.
pub fn run_timed(algo: Algo, frame: &SceneFrame, params: &SegParams) -> RunEval {
    let t = Instant::now();
    let seg = algo.run(frame, params);
    let secs = t.elapsed().as_secs_f64();
    evaluate_run(frame, &seg, secs)
}

#[derive(Debug, Clone)]
pub struct FrameEval {
    pub seed: u64,
    pub frame_index: usize,
    pub points: usize,
    pub ghosts: usize,
    pub base: RunEval,
    pub ours: RunEval,
}

pub fn evaluate_frame(frame: &SceneFrame, seed: u64, params: &SegParams) -> FrameEval {
    FrameEval {
        seed,
        frame_index: frame.frame_index,
        points: frame.len(),
        ghosts: frame.ghost_index.len(),
        base: run_timed(Algo::Baseline, frame, params),
        ours: run_timed(Algo::GreenSeg, frame, params),
    }
}

/// Aggregate over a set of frames.
#[derive(Debug, Clone)]
pub struct Trial {
    pub label: String,
    pub frames: Vec<FrameEval>,
    /// Pooled counts over all frames.
    pub base_pooled: Confusion,
    pub ours_pooled: Confusion,
}

impl Trial {
    pub fn from_frames(label: impl Into<String>, frames: Vec<FrameEval>) -> Self {
        let mut base_pooled = Confusion::default();
        let mut ours_pooled = Confusion::default();
        for f in &frames {
            base_pooled += f.base.confusion;
            ours_pooled += f.ours.confusion;
        }
        Self {
            label: label.into(),
            frames,
            base_pooled,
            ours_pooled,
        }
    }

    pub fn micro(&self) -> ([ClassMetrics; 4], [ClassMetrics; 4]) {
        (self.ours_pooled.metrics(), self.base_pooled.metrics())
    }

    pub fn macro_(&self) -> ([ClassMetrics; 4], [ClassMetrics; 4]) {
        let ours: Vec<_> = self.frames.iter().map(|f| f.ours.confusion.metrics()).collect();
        let base: Vec<_> = self.frames.iter().map(|f| f.base.confusion.metrics()).collect();
        (macro_average(&ours), macro_average(&base))
    }

    /// Improvement report on pooled counts.
    pub fn report(&self) -> Report {
        let (o, b) = self.micro();
        summarize(&o, &b)
    }

    pub fn macro_report(&self) -> Report {
        let (o, b) = self.macro_();
        summarize(&o, &b)
    }

    pub fn all_partitions_ok(&self) -> bool {
        self.frames.iter().all(|f| f.base.partition_ok && f.ours.partition_ok)
    }
}

/// Frames `0..n_frames` for each seed, evaluated with both algorithms.
pub fn run_trial(preset: &ScenePreset, seeds: &[u64], n_frames: usize, params: &SegParams) -> Result<Trial> {
    let per_seed: Vec<Vec<FrameEval>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<FrameEval>> {
            let mut p = preset.clone();
            p.seed = seed;
            p.max_travel_frames = p.max_travel_frames.max(n_frames);
            let scene = Scene::new(p)?;
            Ok((0..n_frames)
                .map(|k| evaluate_frame(&scene.frame(k), seed, params))
                .collect())
        })
        .collect::<Result<_>>()?;
    let frames = per_seed.into_iter().flatten().collect();
    Ok(Trial::from_frames(
        format!("{}/{}", preset.scenario, preset.solar),
        frames,
    ))
}
