//! Static scene geometry: floor, solid blocks, foliage and robot-relative
//! artifact regions. Everything here is fixed by the preset seed.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Material, Scenario, ScenePreset};
use crate::types::Point3;

/// Axis-aligned box in scene coordinates, resting on the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub height: f64,
    /// Foliage rises from the top face along the faces toward the aisle.
    pub foliage_to: Option<f64>,
}

impl Block {
    fn contains_xy(&self, x: f64, y: f64, margin: f64) -> bool {
        x >= self.x[0] - margin && x <= self.x[1] + margin && y >= self.y[0] - margin && y <= self.y[1] + margin
    }
}

/// Smooth floor relief: a few plane waves scaled to a target standard deviation.
#[derive(Debug, Clone)]
struct Relief {
    waves: Vec<(f64, f64, f64, f64)>, // (kx, ky, phase, weight)
}

impl Relief {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let n = 3;
        let waves = (0..n)
            .map(|_| {
                let dir = rng.random_range(0.0..TAU);
                let lambda = rng.random_range(0.6..1.5);
                let k = TAU / lambda;
                // each sinusoid has variance w²/2; weights sum to unit variance
                (
                    k * dir.cos(),
                    k * dir.sin(),
                    rng.random_range(0.0..TAU),
                    (2.0 / n as f64).sqrt(),
                )
            })
            .collect();
        Self { waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.waves
            .iter()
            .map(|&(kx, ky, ph, w)| w * (kx * x + ky * y + ph).sin())
            .sum()
    }
}

/// Disk on the floor in the robot's base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.x).hypot(y - self.y) <= self.radius
    }
}

/// What a world sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Floor,
    Solid,
    Foliage,
}

#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub p: Point3,
    pub kind: SurfaceKind,
}

/// Fixed geometry for one preset seed.
#[derive(Debug, Clone)]
pub struct Layout {
    pub blocks: Vec<Block>,
    relief: Relief,
    slope: f64,
    /// Scene x where the floor material switches, if any.
    material_edge: Option<f64>,
    near_material: Material,
    far_material: Material,
    /// Robot yaw in the scene, radians.
    pub yaw: f64,
    /// Ghost clusters, base frame. Each sits inside its dropout hole.
    pub ghost_clusters: Vec<Disk>,
    /// Floor dropout holes, base frame (ghost holes first).
    pub holes: Vec<Disk>,
    pub samples: Vec<Sample>,
}

/// Gap kept clear of real floor points around each ghost cluster.
pub const GHOST_GAP: f64 = 0.2;
const HOLE_MARGIN: f64 = 0.05;

impl Layout {
    pub fn build(preset: &ScenePreset, rng: &mut ChaCha8Rng) -> Self {
        let aisle = preset.aisle_width + rng.random_range(-0.03..0.03);
        let half = aisle / 2.0;
        let mut blocks = Vec::new();
        let (near_material, far_material, material_edge, yaw);
        match preset.scenario {
            Scenario::CentralCorridor => {
                near_material = Material::Concrete;
                far_material = Material::Concrete;
                material_edge = None;
                yaw = 0.0;
                for side in [-1.0, 1.0] {
                    blocks.push(row_block(side, half, [-1.0, 8.0], 0.15));
                }
                let x0 = rng.random_range(1.7..2.3);
                let y0 = rng.random_range(-half + 0.05..half - 0.45);
                blocks.push(crate_block(x0, y0, 0.4, 0.3, 0.3));
            }
            Scenario::CropRows => {
                near_material = Material::Soil;
                far_material = Material::Soil;
                material_edge = None;
                yaw = 0.0;
                for side in [-1.0, 1.0] {
                    blocks.push(row_block(side, half, [-1.0, 8.0], 0.25));
                }
                let x0 = rng.random_range(2.0..2.5);
                let y0 = rng.random_range(-half + 0.05..half - 0.3);
                blocks.push(crate_block(x0, y0, 0.25, 0.25, 0.3));
            }
            Scenario::EndTurn => {
                near_material = Material::Soil;
                far_material = Material::Concrete;
                let end = rng.random_range(1.5..1.7);
                material_edge = Some(end);
                yaw = rng.random_range(22.0f64..28.0).to_radians();
                for side in [-1.0, 1.0] {
                    blocks.push(row_block(side, half, [-1.0, end], 0.25));
                }
                let x0 = end + rng.random_range(0.6..0.9);
                blocks.push(crate_block(x0, rng.random_range(0.2..0.5), 0.4, 0.3, 0.35));
            }
            Scenario::CorridorChange => {
                near_material = Material::Gravel;
                far_material = Material::Gravel;
                material_edge = None;
                yaw = 0.0;
                // row ends on the left with aisle entrances between them
                let y0 = rng.random_range(0.75..0.85);
                let mut x = rng.random_range(0.2..0.6);
                while x < 6.0 {
                    blocks.push(Block {
                        x: [x, x + 0.7],
                        y: [y0, y0 + 4.0],
                        height: 0.25,
                        foliage_to: Some(2.0),
                    });
                    x += 0.7 + aisle;
                }
                // greenhouse side wall on the right
                blocks.push(Block {
                    x: [-1.0, 8.0],
                    y: [-2.2, -1.8],
                    height: 2.5,
                    foliage_to: None,
                });
                for k in 0..3 {
                    let px = 1.3 + k as f64 * 1.0 + rng.random_range(-0.1..0.1);
                    blocks.push(crate_block(px, -1.2, 0.08, 0.08, 2.4));
                }
            }
        }
        let relief = Relief::new(rng);
        let mut layout = Self {
            blocks,
            relief,
            slope: preset.slope_pct / 100.0,
            material_edge,
            near_material,
            far_material,
            yaw,
            ghost_clusters: Vec::new(),
            holes: Vec::new(),
            samples: Vec::new(),
        };
        layout.place_artifacts(preset, rng);
        layout.samples = layout.sample(preset, rng);
        layout
    }

    /// Flat top of a block: its height above the nominal floor at its center.
    pub fn block_top(&self, b: &Block) -> f64 {
        self.plane_height(0.5 * (b.x[0] + b.x[1])) + b.height
    }

    fn material_at(&self, x: f64) -> Material {
        match self.material_edge {
            Some(e) if x >= e => self.far_material,
            _ => self.near_material,
        }
    }

    /// Nominal floor height (slope only), scene coordinates.
    pub fn plane_height(&self, x: f64) -> f64 {
        self.slope * x
    }

    /// Floor height including relief, scene coordinates.
    pub fn floor_height(&self, x: f64, y: f64) -> f64 {
        self.plane_height(x) + self.material_at(x).relief_amplitude() * self.relief.at(x, y)
    }

    /// Scene position of a base-frame xy location (robot at the origin of frame 0).
    pub fn base_to_scene_xy(&self, x: f64, y: f64, robot_x: f64) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        (robot_x + c * x - s * y, s * x + c * y)
    }

    fn on_open_floor(&self, x: f64, y: f64, margin: f64) -> bool {
        !self.blocks.iter().any(|b| b.contains_xy(x, y, margin))
    }

    fn place_artifacts(&mut self, preset: &ScenePreset, rng: &mut ChaCha8Rng) {
        if !preset.artifacts {
            return;
        }
        let prof = preset.profile;
        let mut taken: Vec<Disk> = Vec::new();
        let mut place = |layout: &Self, radius: f64, keep_clear: f64, rng: &mut ChaCha8Rng| -> Option<Disk> {
            for _ in 0..400 {
                let d = Disk {
                    x: rng.random_range(1.1..2.5),
                    y: rng.random_range(-0.6..0.6),
                    radius,
                };
                // floor under the cluster must be open in the scene
                let clear = (0..16).all(|k| {
                    let a = k as f64 * TAU / 16.0;
                    let (bx, by) = (d.x + keep_clear * a.cos(), d.y + keep_clear * a.sin());
                    let (sx, sy) = layout.base_to_scene_xy(bx, by, 0.0);
                    layout.on_open_floor(sx, sy, 0.0)
                });
                let (cx, cy) = layout.base_to_scene_xy(d.x, d.y, 0.0);
                let apart = taken
                    .iter()
                    .all(|t| (t.x - d.x).hypot(t.y - d.y) > t.radius + d.radius + 0.05);
                if clear && apart && layout.on_open_floor(cx, cy, keep_clear) && d.x.hypot(d.y) + radius < 2.8 {
                    taken.push(d);
                    return Some(d);
                }
            }
            None
        };
        for _ in 0..prof.ghost_clusters {
            let rc = prof.ghost_radius;
            let hole_r = rc + GHOST_GAP + HOLE_MARGIN;
            if let Some(hole) = place(self, hole_r, rc + 0.1, rng) {
                self.ghost_clusters.push(Disk { radius: rc, ..hole });
                self.holes.push(hole);
            }
        }
        for _ in 0..prof.glare_holes {
            let r = rng.random_range(0.08..0.18);
            if let Some(hole) = place(self, r, 0.0, rng) {
                self.holes.push(hole);
            }
        }
    }

    fn sample(&self, preset: &ScenePreset, rng: &mut ChaCha8Rng) -> Vec<Sample> {
        let s = preset.grid_spacing;
        let jit = s * 0.3;
        let reach = preset.view_range + preset.robot_speed * super::FRAME_DT * preset.max_travel_frames as f64 + 0.5;
        let mut out = Vec::new();
        let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-jit..jit);

        // floor
        let (xr, yr) = ([-0.5, reach + 0.5], [-reach, reach]);
        let nx = ((xr[1] - xr[0]) / s) as usize;
        let ny = ((yr[1] - yr[0]) / s) as usize;
        for i in 0..=nx {
            for j in 0..=ny {
                let (x, y) = (xr[0] + i as f64 * s + jitter(rng), yr[0] + j as f64 * s + jitter(rng));
                if self.on_open_floor(x, y, 0.0) {
                    out.push(Sample {
                        p: Point3::new(x, y, self.floor_height(x, y)),
                        kind: SurfaceKind::Floor,
                    });
                }
            }
        }

        // block faces, clipped to the reachable region; visibility is decided per frame
        let clip = |r: [f64; 2], lim: [f64; 2]| [r[0].max(lim[0]), r[1].min(lim[1])];
        for b in &self.blocks {
            let ground = |x: f64, y: f64| self.floor_height(x, y);
            let top = self.block_top(b);
            let faces: [([f64; 2], [f64; 2], bool); 4] = [
                ([b.x[0], b.x[0]], clip(b.y, yr), true),
                ([b.x[1], b.x[1]], clip(b.y, yr), true),
                (clip(b.x, xr), [b.y[0], b.y[0]], false),
                (clip(b.x, xr), [b.y[1], b.y[1]], false),
            ];
            for (fx, fy, along_y) in faces {
                let inside = |v: f64, lim: [f64; 2]| v >= lim[0] && v <= lim[1];
                if (along_y && !inside(fx[0], xr)) || (!along_y && !inside(fy[0], yr)) {
                    continue;
                }
                let len = if along_y { fy[1] - fy[0] } else { fx[1] - fx[0] };
                if len < 0.0 {
                    continue;
                }
                let (dx, dy) = face_outward(b, fx[0], fy[0], along_y);
                let nu = (len / s) as usize;
                for i in 0..=nu {
                    let t = (i as f64 * s + jitter(rng)).clamp(0.0, len);
                    let (x, y) = if along_y {
                        (fx[0], fy[0] + t)
                    } else {
                        (fx[0] + t, fy[0])
                    };
                    let z0 = ground(x, y);
                    let rise = (top - z0).max(0.0);
                    let nz = (rise / s) as usize;
                    for k in 0..=nz {
                        let z = (k as f64 * s + jitter(rng)).clamp(0.0, rise);
                        out.push(Sample {
                            p: Point3::new(x, y, z0 + z),
                            kind: SurfaceKind::Solid,
                        });
                    }
                    if let Some(canopy) = b.foliage_to {
                        let nf = ((canopy - b.height) / s) as usize;
                        for k in 0..nf {
                            if rng.random::<f64>() < 0.4 {
                                continue;
                            }
                            let z = top + (k as f64 + rng.random::<f64>()) * s;
                            // leaves scatter toward the aisle
                            let off = rng.random_range(0.0..0.1);
                            out.push(Sample {
                                p: Point3::new(x + dx * off, y + dy * off, z),
                                kind: SurfaceKind::Foliage,
                            });
                        }
                    }
                }
            }
            // top face
            let (tx, ty) = (clip(b.x, xr), clip(b.y, yr));
            if tx[0] > tx[1] || ty[0] > ty[1] {
                continue;
            }
            let nx = ((tx[1] - tx[0]) / s) as usize;
            let ny = ((ty[1] - ty[0]) / s) as usize;
            for i in 0..=nx {
                for j in 0..=ny {
                    let (x, y) = (
                        (tx[0] + i as f64 * s + jitter(rng)).clamp(tx[0], tx[1]),
                        (ty[0] + j as f64 * s + jitter(rng)).clamp(ty[0], ty[1]),
                    );
                    out.push(Sample {
                        p: Point3::new(x, y, top),
                        kind: SurfaceKind::Solid,
                    });
                }
            }
        }
        out
    }

    /// True if the open segment from `from` to `to` passes through a block.
    pub fn occluded(&self, from: &Point3, to: &Point3) -> bool {
        let d = to - from;
        self.blocks.iter().any(|b| {
            let lo = [b.x[0], b.y[0], f64::NEG_INFINITY];
            let hi = [b.x[1], b.y[1], self.block_top(b)];
            let (mut t0, mut t1) = (0.0f64, 1.0f64 - 1e-6);
            for k in 0..3 {
                if d[k].abs() < 1e-15 {
                    if from[k] < lo[k] || from[k] > hi[k] {
                        return false;
                    }
                    continue;
                }
                let (a, c) = ((lo[k] - from[k]) / d[k], (hi[k] - from[k]) / d[k]);
                t0 = t0.max(a.min(c));
                t1 = t1.min(a.max(c));
            }
            // grazing contact with a face does not hide a point
            t1 - t0 > 1e-6
        })
    }
}

fn face_outward(b: &Block, x: f64, y: f64, along_y: bool) -> (f64, f64) {
    if along_y {
        if (x - b.x[0]).abs() < 1e-12 {
            (-1.0, 0.0)
        } else {
            (1.0, 0.0)
        }
    } else if (y - b.y[0]).abs() < 1e-12 {
        (0.0, -1.0)
    } else {
        (0.0, 1.0)
    }
}

fn row_block(side: f64, half: f64, x: [f64; 2], height: f64) -> Block {
    let y = if side > 0.0 {
        [half, half + 1.5]
    } else {
        [-half - 1.5, -half]
    };
    Block {
        x,
        y,
        height,
        foliage_to: Some(2.0),
    }
}

fn crate_block(x0: f64, y0: f64, dx: f64, dy: f64, h: f64) -> Block {
    Block {
        x: [x0, x0 + dx],
        y: [y0, y0 + dy],
        height: h,
        foliage_to: None,
    }
}
