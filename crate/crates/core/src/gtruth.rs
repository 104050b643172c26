//! Reference labels from temporal agreement over a voxel grid.
//!
//! Each frame casts one vote per occupied voxel (the majority label of the
//! points inside it). A voxel is labeled only if it was observed in every
//! frame of the window and one label holds at least `psi_min` of its votes.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{LabeledCloud, Point3, SemanticLabel};

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_PSI_MIN: f64 = 0.9;

/// Slack on the agreement ratio so that `9 >= 0.9 * 10` holds in floating point.
const RATIO_EPS: f64 = 1e-9;

const HEADER: &str = "# greenseg-gt v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub ix: i64,
    pub iy: i64,
    pub iz: i64,
}

impl VoxelKey {
    pub fn new(ix: i64, iy: i64, iz: i64) -> Self {
        Self { ix, iy, iz }
    }

    pub fn of(p: &Point3, resolution: f64) -> Self {
        Self {
            ix: (p.x / resolution).floor() as i64,
            iy: (p.y / resolution).floor() as i64,
            iz: (p.z / resolution).floor() as i64,
        }
    }
}

/// Majority label of a set of labels; a tie for first place is `Undefined`.
pub fn majority_label(labels: impl IntoIterator<Item = SemanticLabel>) -> SemanticLabel {
    let mut counts = [0usize; 5];
    for l in labels {
        counts[slot(l)] += 1;
    }
    vote_winner(&counts)
}

fn slot(l: SemanticLabel) -> usize {
    l.class_index().unwrap_or(4)
}

const SLOTS: [SemanticLabel; 5] = [
    SemanticLabel::Ground,
    SemanticLabel::Obstacle,
    SemanticLabel::Above,
    SemanticLabel::Noise,
    SemanticLabel::Undefined,
];

fn vote_winner(counts: &[usize; 5]) -> SemanticLabel {
    let best = *counts.iter().max().unwrap();
    let mut winners = (0..5).filter(|&k| counts[k] == best);
    match (winners.next(), winners.next()) {
        (Some(k), None) if best > 0 => SLOTS[k],
        _ => SemanticLabel::Undefined,
    }
}

/// Sliding-window vote store.
#[derive(Debug, Clone)]
pub struct GtAccumulator {
    resolution: f64,
    window: usize,
    frames: usize,
    // voxel -> (frame number, vote), oldest first
    votes: BTreeMap<VoxelKey, VecDeque<(usize, SemanticLabel)>>,
}

impl GtAccumulator {
    pub fn new(resolution: f64, window: usize) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "voxel resolution must be positive, got {resolution}"
            )));
        }
        if window == 0 {
            return Err(Error::InvalidParams("window must be at least 1 frame".into()));
        }
        Ok(Self {
            resolution,
            window,
            frames: 0,
            votes: BTreeMap::new(),
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Frames accumulated so far, including evicted ones.
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Votes currently held for `key`, oldest first.
    pub fn votes(&self, key: &VoxelKey) -> Vec<SemanticLabel> {
        self.votes
            .get(key)
            .map(|q| q.iter().map(|&(_, l)| l).collect())
            .unwrap_or_default()
    }

    pub fn voxel_count(&self) -> usize {
        self.votes.len()
    }

    /// Adds one frame's per-voxel majority votes and drops votes that fell
    /// out of the window.
    pub fn accumulate_frame(&mut self, labeled: &LabeledCloud) {
        let mut tallies: BTreeMap<VoxelKey, [usize; 5]> = BTreeMap::new();
        for (p, l) in labeled.iter() {
            tallies.entry(VoxelKey::of(p, self.resolution)).or_default()[slot(l)] += 1;
        }
        let frame = self.frames;
        self.frames += 1;
        for (key, counts) in tallies {
            self.votes
                .entry(key)
                .or_default()
                .push_back((frame, vote_winner(&counts)));
        }
        let oldest_kept = self.frames.saturating_sub(self.window);
        self.votes.retain(|_, q| {
            while q.front().is_some_and(|&(f, _)| f < oldest_kept) {
                q.pop_front();
            }
            !q.is_empty()
        });
    }

    /// Labels every voxel with votes in the current window.
    pub fn extract_ground_truth(&self, psi_min: f64) -> GroundTruthMap {
        let labels = self
            .votes
            .iter()
            .map(|(&key, q)| {
                let label = if q.len() < self.window {
                    SemanticLabel::Undefined
                } else {
                    agreed_label(q.iter().map(|&(_, l)| l), psi_min)
                };
                (key, label)
            })
            .collect();
        GroundTruthMap {
            resolution: self.resolution,
            window: self.window,
            psi_min,
            labels,
        }
    }
}

fn agreed_label(votes: impl Iterator<Item = SemanticLabel>, psi_min: f64) -> SemanticLabel {
    let mut counts = [0usize; 5];
    let mut n = 0;
    for v in votes {
        counts[slot(v)] += 1;
        n += 1;
    }
    counts[4] = 0;
    let best = vote_winner(&counts);
    if best == SemanticLabel::Undefined {
        return best;
    }
    if counts[slot(best)] as f64 >= psi_min * n as f64 - RATIO_EPS {
        best
    } else {
        SemanticLabel::Undefined
    }
}

/// Voxel labels; `Undefined` marks observed voxels without agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMap {
    pub resolution: f64,
    pub window: usize,
    pub psi_min: f64,
    pub labels: BTreeMap<VoxelKey, SemanticLabel>,
}

impl GroundTruthMap {
    pub fn get(&self, key: &VoxelKey) -> Option<SemanticLabel> {
        self.labels.get(key).copied()
    }

    /// Label of the voxel holding `p`, if that voxel was observed.
    pub fn label_at(&self, p: &Point3) -> Option<SemanticLabel> {
        self.get(&VoxelKey::of(p, self.resolution))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn undefined_count(&self) -> usize {
        self.labels.values().filter(|&&l| l == SemanticLabel::Undefined).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{HEADER} resolution={} window={} psi_min={}\n",
            self.resolution, self.window, self.psi_min
        );
        for (k, l) in &self.labels {
            let _ = writeln!(s, "{} {} {} {}", k.ix, k.iy, k.iz, l.code());
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// True if `text` starts with the voxel-map header.
    pub fn sniff(text: &str) -> bool {
        text.starts_with(HEADER)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .map(|(_, l)| l)
            .filter(|l| l.starts_with(HEADER))
            .ok_or_else(|| Error::parse(path, 1, format!("expected `{HEADER}` header")))?;
        let (mut resolution, mut window, mut psi_min) = (None, None, None);
        for field in header[HEADER.len()..].split_whitespace() {
            let bad = || Error::parse(path, 1, format!("bad header field `{field}`"));
            let (k, v) = field.split_once('=').ok_or_else(bad)?;
            match k {
                "resolution" => resolution = Some(v.parse::<f64>().map_err(|_| bad())?),
                "window" => window = Some(v.parse::<usize>().map_err(|_| bad())?),
                "psi_min" => psi_min = Some(v.parse::<f64>().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let resolution = resolution
            .filter(|r| *r > 0.0)
            .ok_or_else(|| Error::parse(path, 1, "missing or invalid resolution"))?;
        let mut labels = BTreeMap::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = |m: &str| Error::parse(path, i + 1, m.to_string());
            if f.len() != 4 {
                return Err(bad("expected `ix iy iz label`"));
            }
            let idx = |s: &str| s.parse::<i64>().map_err(|_| bad("voxel index is not an integer"));
            let key = VoxelKey::new(idx(f[0])?, idx(f[1])?, idx(f[2])?);
            let label = f[3]
                .parse::<u8>()
                .ok()
                .and_then(SemanticLabel::from_code)
                .ok_or_else(|| bad("unknown label code"))?;
            labels.insert(key, label);
        }
        Ok(Self {
            resolution,
            window: window.unwrap_or(DEFAULT_WINDOW),
            psi_min: psi_min.unwrap_or(DEFAULT_PSI_MIN),
            labels,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
