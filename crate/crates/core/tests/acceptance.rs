//! Acceptance checks. One PASS/FAIL line per criterion; exits non-zero if any
//! criterion fails. Tolerances are fixed here and never adjusted to results.

use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use greenseg_core::experiment::{is_partition, run_trial, Trial};
use greenseg_core::gtruth::GtAccumulator;
use greenseg_core::localgeom::{local_covariance, normal_and_curvature, LocalSurface, SpatialIndex};
use greenseg_core::metrics::{improvement_pct, summarize, ClassMetrics, Metric};
use greenseg_core::regiongrow::{grow_region, select_seed};
use greenseg_core::simulate::{Scenario, Scene, ScenePreset, Solar};
use greenseg_core::{
    baseline_segment, fit_plane_lsq, greenseg_segment, LabeledCloud, Plane, Point3, PointCloud, RigidTransform,
    SegParams, SemanticLabel,
};
use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

static FRAMES_CHECKED: AtomicUsize = AtomicUsize::new(0);
static PARTITION_FAILURES: AtomicUsize = AtomicUsize::new(0);

fn note_partition(ok: bool) {
    FRAMES_CHECKED.fetch_add(1, Ordering::Relaxed);
    if !ok {
        PARTITION_FAILURES.fetch_add(1, Ordering::Relaxed);
    }
}

fn note_trial(t: &Trial) {
    for f in &t.frames {
        note_partition(f.base.partition_ok);
        note_partition(f.ours.partition_ok);
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- criterion 1

/// Field trial tables: rows ground, obstacle, above, noise; columns P, R, F1, IoU.
struct FieldTable {
    name: &'static str,
    base: [[f64; 4]; 4],
    ours: [[f64; 4]; 4],
    base_mean: [f64; 4],
    ours_mean: [f64; 4],
    /// Printed improvements in percent, two decimals.
    printed: [f64; 4],
}

const TABLES: [FieldTable; 4] = [
    FieldTable {
        name: "nominal",
        base: [
            [0.956, 0.948, 0.958, 0.931],
            [0.891, 0.915, 0.915, 0.865],
            [0.935, 0.926, 0.931, 0.875],
            [0.856, 0.815, 0.822, 0.715],
        ],
        ours: [
            [0.970, 0.960, 0.965, 0.933],
            [0.910, 0.970, 0.939, 0.885],
            [0.940, 0.930, 0.935, 0.878],
            [0.880, 0.820, 0.849, 0.737],
        ],
        base_mean: [0.910, 0.901, 0.907, 0.847],
        ours_mean: [0.925, 0.920, 0.922, 0.858],
        printed: [1.65, 2.11, 1.65, 1.30],
    },
    FieldTable {
        name: "moderate sun",
        base: [
            [0.885, 0.870, 0.877, 0.781],
            [0.815, 0.830, 0.822, 0.698],
            [0.860, 0.855, 0.857, 0.750],
            [0.780, 0.740, 0.759, 0.612],
        ],
        ours: [
            [0.935, 0.925, 0.930, 0.869],
            [0.885, 0.935, 0.909, 0.833],
            [0.910, 0.895, 0.902, 0.821],
            [0.845, 0.805, 0.824, 0.701],
        ],
        base_mean: [0.835, 0.824, 0.829, 0.710],
        ours_mean: [0.894, 0.890, 0.891, 0.806],
        printed: [7.07, 8.01, 7.48, 13.52],
    },
    FieldTable {
        name: "strong sun",
        base: [
            [0.810, 0.805, 0.807, 0.677],
            [0.740, 0.765, 0.752, 0.602],
            [0.795, 0.780, 0.787, 0.649],
            [0.690, 0.655, 0.672, 0.506],
        ],
        ours: [
            [0.890, 0.885, 0.887, 0.796],
            [0.840, 0.890, 0.864, 0.760],
            [0.855, 0.845, 0.849, 0.738],
            [0.780, 0.735, 0.756, 0.608],
        ],
        base_mean: [0.758, 0.751, 0.754, 0.608],
        ours_mean: [0.841, 0.838, 0.839, 0.725],
        printed: [10.95, 11.58, 11.27, 19.24],
    },
    FieldTable {
        name: "row transitions",
        base: [
            [0.895, 0.880, 0.887, 0.797],
            [0.840, 0.855, 0.847, 0.734],
            [0.880, 0.875, 0.877, 0.781],
            [0.805, 0.765, 0.784, 0.645],
        ],
        ours: [
            [0.925, 0.910, 0.917, 0.846],
            [0.880, 0.915, 0.897, 0.813],
            [0.915, 0.905, 0.909, 0.833],
            [0.845, 0.800, 0.821, 0.696],
        ],
        base_mean: [0.855, 0.843, 0.848, 0.739],
        ours_mean: [0.891, 0.882, 0.886, 0.797],
        printed: [4.21, 4.63, 4.48, 7.85],
    },
];

fn rows(t: &[[f64; 4]; 4]) -> Vec<ClassMetrics> {
    t.iter().map(|r| ClassMetrics::new(r[0], r[1], r[2], r[3])).collect()
}

fn table_arithmetic_per_class() -> Outcome {
    let t0 = Instant::now();
    let strong = &TABLES[2];
    let report = summarize(&rows(&strong.ours), &rows(&strong.base));
    let recall = report.improvement_of(Metric::Recall).unwrap();
    let iou = report.improvement_of(Metric::Iou).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let pass = (recall - 11.58).abs() <= 0.01 && (iou - 19.24).abs() <= 0.01 && secs < 1.0;
    outcome(
        pass,
        format!(
            "strong-sun per-class rows give recall {recall:+.3}% (want 11.58), IoU {iou:+.3}% (want 19.24), {secs:.4}s"
        ),
    )
}

fn table_arithmetic_printed() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    let mut n = 0;
    for t in &TABLES {
        for (k, m) in Metric::ALL.iter().enumerate() {
            let got = improvement_pct(t.base_mean[k], t.ours_mean[k]).unwrap();
            let err = (got - t.printed[k]).abs();
            worst = worst.max(err);
            n += 1;
            if err > 0.01 {
                misses.push(format!("{} {} {got:.3}", t.name, m.name()));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        misses.is_empty() && secs < 1.0,
        format!("{n} printed improvements from mean rows, worst error {worst:.4} pp, {secs:.4}s {misses:?}"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn plane_recovery() -> Outcome {
    let params = SegParams::default();
    let noise = Normal::new(0.0, 0.005).unwrap();
    let (mut worst_angle, mut worst_offset, mut worst_ms) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: f64 = rng.random_range(-0.03..0.03);
        let pts: Vec<Point3> = (0..10_000)
            .map(|_| {
                let x: f64 = rng.random_range(0.4..2.8);
                let y: f64 = rng.random_range(-1.0..1.0);
                Point3::new(x, y, 0.02 * x + c + noise.sample(&mut rng))
            })
            .collect();
        let truth = Plane::new(Vector3::new(-0.02, 0.0, 1.0), -c).unwrap();
        let cloud = PointCloud::new(pts, "base_link").unwrap();
        let t0 = Instant::now();
        let seg = baseline_segment(&cloud, &RigidTransform::identity(), &params);
        worst_ms = worst_ms.max(t0.elapsed().as_secs_f64() * 1e3);
        note_partition(is_partition(&seg, cloud.len()));
        let Some(plane) = seg.plane() else {
            return outcome(false, format!("seed {seed}: no plane"));
        };
        worst_angle = worst_angle.max(plane.angle_to(&truth).to_degrees());
        worst_offset = worst_offset.max((plane.offset() - truth.offset()).abs());
    }
    outcome(
        worst_angle < 0.5 && worst_offset < 0.005 && worst_ms < 100.0,
        format!(
            "100 seeds: worst angle {worst_angle:.4} deg, worst offset {:.3} mm, worst {worst_ms:.2} ms/frame",
            worst_offset * 1e3
        ),
    )
}

// ---------------------------------------------------------------- criterion 3

fn ghost_rejection() -> Outcome {
    let params = SegParams::default();
    let seeds: Vec<u64> = (0..20).collect();
    let (mut ghosts, mut base_ground, mut ours_ground) = (0, 0, 0);
    let mut worst_base_share: f64 = 1.0;
    for sc in Scenario::ALL {
        let t = match run_trial(&ScenePreset::new(sc, Solar::S4, 0), &seeds, 1, &params) {
            Ok(t) => t,
            Err(e) => return outcome(false, format!("{sc}: {e}")),
        };
        note_trial(&t);
        for f in &t.frames {
            ghosts += f.ghosts;
            base_ground += f.base.ghosts_in_ground;
            ours_ground += f.ours.ghosts_in_ground;
            if f.ghosts > 0 {
                worst_base_share = worst_base_share.min(f.base.ghosts_in_ground as f64 / f.ghosts as f64);
            }
        }
    }
    outcome(
        ghosts > 0 && worst_base_share > 0.9 && ours_ground == 0,
        format!(
            "s4, 4 scenarios x 20 seeds: {ghosts} ghosts; baseline ground {base_ground} (worst frame {:.1}%), verified ground {ours_ground}",
            worst_base_share * 100.0
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn directional_superiority() -> Outcome {
    let params = SegParams::default();
    let seeds: Vec<u64> = (0..20).collect();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for sc in Scenario::ALL {
        for so in Solar::ALL {
            let name = format!("{sc}/{so}");
            let t = match run_trial(&ScenePreset::new(sc, so, 0), &seeds, 1, &params) {
                Ok(t) => t,
                Err(e) => return outcome(false, format!("{name}: {e}")),
            };
            note_trial(&t);
            let r = t.report();
            let (Some(b), Some(o)) = (r.base.mean.iou, r.ours.mean.iou) else {
                failures.push(format!("{name}: undefined mean IoU"));
                continue;
            };
            // every solar profile injects artifacts, so the bar is strict
            if o <= b {
                failures.push(format!("{name}: {o:.4} vs {b:.4}"));
            }
            lines.push(format!("{name} {b:.3}->{o:.3}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "mean IoU over 20 seeds per preset: {}{}",
            lines.join(", "),
            fail_suffix(&failures)
        ),
    )
}

/// Artifact-free scenes, reported but not graded. A handful of points the
/// verifier calls noise make the noise class defined (IoU 0) for it while it
/// stays undefined for the baseline, which drags the four-class mean down.
fn clean_scene_report() -> String {
    let params = SegParams::default();
    let seeds: Vec<u64> = (0..20).collect();
    let mut lines = Vec::new();
    for sc in Scenario::ALL {
        let Ok(t) = run_trial(
            &ScenePreset::new(sc, Solar::S1, 0).without_artifacts(),
            &seeds,
            1,
            &params,
        ) else {
            continue;
        };
        note_trial(&t);
        let (o, b) = t.micro();
        let iou = |m: &[ClassMetrics; 4], k: usize| m[k].iou.map_or("-".to_string(), |v| format!("{v:.3}"));
        let r = t.report();
        lines.push(format!(
            "{sc}: ground {}->{}, obstacle {}->{}, mean {:.3}->{:.3}",
            iou(&b, 0),
            iou(&o, 0),
            iou(&b, 1),
            iou(&o, 1),
            r.base.mean.iou.unwrap_or(f64::NAN),
            r.ours.mean.iou.unwrap_or(f64::NAN)
        ));
    }
    lines.join("; ")
}

fn fail_suffix(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; failing {failures:?}")
    }
}

// ---------------------------------------------------------------- criterion 5

fn connected_component(pts: &[Point3], ok: &[bool], seed: usize, r: f64) -> Vec<usize> {
    if !ok[seed] {
        return vec![seed];
    }
    let n = pts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if ok[i] && ok[j] && (pts[i] - pts[j]).norm() <= r {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let root = find(&mut parent, seed);
    (0..n).filter(|&i| ok[i] && find(&mut parent, i) == root).collect()
}

fn growing_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut sizes = Vec::new();
    for inst in 0..200 {
        let params = SegParams {
            r_growing: rng.random_range(0.03..0.08),
            ..SegParams::default()
        };
        let half = rng.random_range(0.3..0.8);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| {
                Point3::new(
                    rng.random_range(0.3..0.3 + 2.0 * half),
                    rng.random_range(-half..half),
                    rng.random_range(-0.2..0.2),
                )
            })
            .collect();
        let surfaces: Vec<LocalSurface> = (0..1000)
            .map(|_| LocalSurface {
                normal: Vector3::z(),
                curvature: 0.0,
                neighbor_count: 30,
                rho: rng.random_range(0.8..1.0),
            })
            .collect();
        let plane = Plane::horizontal();
        let ok: Vec<bool> = (0..pts.len())
            .map(|i| pts[i].z.abs() <= params.h_ground && surfaces[i].rho >= params.rho_min)
            .collect();
        let seed = select_seed(&pts).unwrap();
        let region = grow_region(&pts, &surfaces, &plane, seed, &params);
        let oracle = connected_component(&pts, &ok, seed, params.r_growing);
        if region.members != oracle {
            return outcome(
                false,
                format!(
                    "instance {inst}: grown {} vs oracle {}",
                    region.members.len(),
                    oracle.len()
                ),
            );
        }
        sizes.push(oracle.len());
    }
    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
    outcome(
        true,
        format!("200 instances of 1000 points equal, component sizes {lo}..{hi}"),
    )
}

fn radius_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hits = 0usize;
    for batch in 0..100 {
        let n = rng.random_range(200..3000);
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.3..0.3),
                )
            })
            .collect();
        let cell = rng.random_range(0.02..0.3);
        let index = SpatialIndex::build(&pts, cell);
        for _ in 0..50 {
            let q = if rng.random::<bool>() {
                pts[rng.random_range(0..n)]
            } else {
                Point3::new(
                    rng.random_range(-1.2..1.2),
                    rng.random_range(-1.2..1.2),
                    rng.random_range(-0.5..0.5),
                )
            };
            let r = rng.random_range(0.0..0.5);
            let scan: Vec<usize> = (0..n).filter(|&i| (pts[i] - q).norm() <= r).collect();
            let got = index.radius_query(&q, r);
            if got != scan {
                return outcome(
                    false,
                    format!("batch {batch}: {} vs {} neighbours", got.len(), scan.len()),
                );
            }
            hits += scan.len();
        }
    }
    outcome(
        true,
        format!("100 batches x 50 queries equal linear scan ({hits} neighbours total)"),
    )
}

// ---------------------------------------------------------------- criterion 6

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

fn curvature_on_planes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = random_unit(&mut rng);
        let u = n
            .cross(&if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() })
            .normalize();
        let v = n.cross(&u);
        let origin = Vector3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.0..1.0),
        );
        let pts: Vec<Point3> = (0..200)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
                Point3::from(origin + u * a + v * b)
            })
            .collect();
        let (_, kappa) = normal_and_curvature(&local_covariance(&pts));
        worst = worst.max(kappa.abs());
    }
    outcome(worst <= 1e-9, format!("100 random planes, max curvature {worst:.2e}"))
}

fn curvature_isotropic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let pts: Vec<Point3> = (0..100_000)
        .map(|_| {
            Point3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            )
        })
        .collect();
    let (_, kappa) = normal_and_curvature(&local_covariance(&pts));
    let err = (kappa - 1.0 / 3.0).abs();
    outcome(
        err <= 1e-3,
        format!("100k Gaussian points (seed 42): curvature {kappa:.5}, |err| {err:.2e}"),
    )
}

fn rotation_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let pts: Vec<Point3> = (0..2000)
        .map(|_| {
            let x: f64 = rng.random_range(0.4..2.5);
            Point3::new(x, rng.random_range(-1.0..1.0), 0.03 * x - 0.01 + noise.sample(&mut rng))
        })
        .collect();
    let fit = fit_plane_lsq(&pts).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let axis = Unit::new_normalize(random_unit(&mut rng));
        let rot = Rotation3::from_axis_angle(&axis, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let t = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let moved: Vec<Point3> = pts.iter().map(|p| rot * p + t).collect();
        let got = fit_plane_lsq(&moved).unwrap();
        let rn = rot * fit.normal();
        let want = Plane::new(rn, fit.offset() - rn.dot(&t)).unwrap();
        worst = worst
            .max((got.normal() - want.normal()).amax())
            .max((got.offset() - want.offset()).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("50 random rigid motions, max deviation {worst:.2e}"),
    )
}

// ---------------------------------------------------------------- criterion 7

fn gt_boundary() -> Outcome {
    let agree = |n_ground: usize| -> Option<SemanticLabel> {
        let mut acc = GtAccumulator::new(0.05, 10).unwrap();
        let p = Point3::new(1.02, 0.01, 0.01);
        for k in 0..10 {
            let l = if k < n_ground {
                SemanticLabel::Ground
            } else {
                SemanticLabel::Obstacle
            };
            acc.accumulate_frame(&LabeledCloud::new(vec![p], vec![l], "base_link", None).unwrap());
        }
        acc.extract_ground_truth(0.9).label_at(&p)
    };
    let nine = agree(9);
    let eight = agree(8);
    outcome(
        nine == Some(SemanticLabel::Ground) && eight == Some(SemanticLabel::Undefined),
        format!("W=10, psi_min=0.9: 9/10 -> {nine:?}, 8/10 -> {eight:?}"),
    )
}

// ---------------------------------------------------------------- criterion 8

fn throughput() -> Outcome {
    let params = SegParams::default();
    let mut frames = Vec::new();
    for sc in Scenario::ALL {
        for so in Solar::ALL {
            for seed in 0..2 {
                let scene = match Scene::new(ScenePreset::new(sc, so, seed)) {
                    Ok(s) => s,
                    Err(e) => return outcome(false, format!("{sc}/{so}: {e}")),
                };
                frames.push(scene.frame(0).nearest(10_000, 0.3));
            }
        }
    }
    // warm-up
    let _ = greenseg_segment(&frames[0].cloud, &frames[0].tf, &params);
    let t0 = Instant::now();
    for f in &frames {
        let seg = greenseg_segment(&f.cloud, &f.tf, &params);
        note_partition(is_partition(&seg, f.len()));
    }
    let secs = t0.elapsed().as_secs_f64();
    let fps = frames.len() as f64 / secs;
    let mean_pts = frames.iter().map(|f| f.len()).sum::<usize>() / frames.len();
    outcome(
        fps >= 10.0,
        format!(
            "{} frames of {mean_pts} points: {fps:.1} frames/s, {:.1} ms/frame, margin {:.1}x over 10 Hz",
            frames.len(),
            secs * 1e3 / frames.len() as f64,
            fps / 10.0
        ),
    )
}

// ---------------------------------------------------------------- criterion 9

fn partition_tally() -> Outcome {
    let n = FRAMES_CHECKED.load(Ordering::Relaxed);
    let bad = PARTITION_FAILURES.load(Ordering::Relaxed);
    outcome(
        n > 0 && bad == 0,
        format!("{n} segmentations checked, {bad} violations"),
    )
}

type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let checks: [Check; 13] = [
        ("1a table arithmetic, per-class rows", table_arithmetic_per_class),
        ("1b table arithmetic, printed improvements", table_arithmetic_printed),
        ("2 plane recovery", plane_recovery),
        ("3 ghost rejection", ghost_rejection),
        ("4 directional superiority", directional_superiority),
        ("5a region growing vs connected components", growing_oracle),
        ("5b radius query vs linear scan", radius_oracle),
        ("6a curvature on planes", curvature_on_planes),
        ("6b curvature on isotropic scatter", curvature_isotropic),
        ("6c plane fit rotation equivariance", rotation_equivariance),
        ("7 ground truth agreement boundary", gt_boundary),
        ("8 throughput", throughput),
        ("9 partition invariant", partition_tally),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let t0 = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{name}] {} ({:.2}s)", o.detail, t0.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("INFO [artifact-free scenes, ungraded] {}", clean_scene_report());
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
