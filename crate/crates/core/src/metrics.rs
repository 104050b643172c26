//! Per-class confusion counts, precision / recall / F1 / IoU, class means and
//! relative improvement between two methods.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::gtruth::GroundTruthMap;
use crate::types::{LabeledCloud, SemanticLabel};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl Add for ClassCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

/// Counts for the four real classes, indexed by [`SemanticLabel::class_index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub classes: [ClassCounts; 4],
    /// Points compared.
    pub evaluated: u64,
    /// Points skipped because the reference label was `Undefined` or missing.
    pub excluded: u64,
}

impl Confusion {
    pub fn class(&self, label: SemanticLabel) -> Option<&ClassCounts> {
        label.class_index().map(|k| &self.classes[k])
    }

    /// Adds one (prediction, reference) pair. `Undefined` references are skipped.
    pub fn record(&mut self, pred: SemanticLabel, gt: SemanticLabel) {
        let Some(g) = gt.class_index() else {
            self.excluded += 1;
            return;
        };
        let p = pred.class_index();
        self.evaluated += 1;
        for (k, c) in self.classes.iter_mut().enumerate() {
            match (p == Some(k), g == k) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }

    pub fn metrics(&self) -> [ClassMetrics; 4] {
        self.classes.map(|c| class_metrics(&c))
    }
}

impl AddAssign for Confusion {
    fn add_assign(&mut self, o: Self) {
        for k in 0..4 {
            self.classes[k] = self.classes[k] + o.classes[k];
        }
        self.evaluated += o.evaluated;
        self.excluded += o.excluded;
    }
}

/// Confusion over two parallel label sequences.
pub fn confusion(pred: &[SemanticLabel], gt: &[SemanticLabel]) -> Result<Confusion> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidParams(format!(
            "prediction has {} labels but reference has {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::DisjointDomains);
    }
    let mut c = Confusion::default();
    for (&p, &g) in pred.iter().zip(gt) {
        c.record(p, g);
    }
    Ok(c)
}

/// Confusion over the keys present in both maps.
pub fn confusion_maps<K: Ord>(pred: &BTreeMap<K, SemanticLabel>, gt: &BTreeMap<K, SemanticLabel>) -> Result<Confusion> {
    let mut c = Confusion::default();
    let mut shared = false;
    for (k, &p) in pred {
        if let Some(&g) = gt.get(k) {
            shared = true;
            c.record(p, g);
        }
    }
    if shared {
        Ok(c)
    } else {
        Err(Error::DisjointDomains)
    }
}

/// Point-wise confusion of a labeled cloud against voxel reference labels.
///
/// Points falling in unobserved voxels count as excluded.
pub fn confusion_voxels(pred: &LabeledCloud, gt: &GroundTruthMap) -> Result<Confusion> {
    let mut c = Confusion::default();
    let mut shared = false;
    for (p, l) in pred.iter() {
        match gt.label_at(p) {
            Some(g) => {
                shared = true;
                c.record(l, g);
            }
            None => c.excluded += 1,
        }
    }
    if shared {
        Ok(c)
    } else {
        Err(Error::DisjointDomains)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Precision,
    Recall,
    F1,
    Iou,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Precision, Metric::Recall, Metric::F1, Metric::Iou];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Iou => "iou",
        }
    }
}

/// Scores for one class; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub iou: Option<f64>,
}

impl ClassMetrics {
    pub fn new(precision: f64, recall: f64, f1: f64, iou: f64) -> Self {
        Self {
            precision: Some(precision),
            recall: Some(recall),
            f1: Some(f1),
            iou: Some(iou),
        }
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
            Metric::Iou => self.iou,
        }
    }

    fn slot(&mut self, m: Metric) -> &mut Option<f64> {
        match m {
            Metric::Precision => &mut self.precision,
            Metric::Recall => &mut self.recall,
            Metric::F1 => &mut self.f1,
            Metric::Iou => &mut self.iou,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn class_metrics(c: &ClassCounts) -> ClassMetrics {
    ClassMetrics {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        iou: ratio(c.tp, c.tp + c.fp + c.fn_),
    }
}

/// Per-metric mean over the classes where that metric is defined.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanMetrics {
    pub mean: ClassMetrics,
    /// Classes left out of at least one mean.
    pub excluded_classes: usize,
}

pub fn mean_metrics(per_class: &[ClassMetrics]) -> MeanMetrics {
    let mut out = MeanMetrics::default();
    let mut excluded = vec![false; per_class.len()];
    for m in Metric::ALL {
        let mut sum = 0.0;
        let mut n = 0;
        for (k, c) in per_class.iter().enumerate() {
            match c.get(m) {
                Some(v) => {
                    sum += v;
                    n += 1;
                }
                None => excluded[k] = true,
            }
        }
        *out.mean.slot(m) = (n > 0).then(|| sum / n as f64);
    }
    out.excluded_classes = excluded.iter().filter(|&&e| e).count();
    out
}

/// Relative change from `base` to `ours`, in percent.
pub fn improvement_pct(base: f64, ours: f64) -> Option<f64> {
    (base != 0.0).then(|| (ours - base) / base * 100.0)
}

/// Rounds to two decimals for display.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Means of both methods and the relative improvement of each mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub ours: MeanMetrics,
    pub base: MeanMetrics,
    /// Unrounded percent, by [`Metric::ALL`] order.
    pub improvement: [Option<f64>; 4],
}

impl Report {
    pub fn improvement_of(&self, m: Metric) -> Option<f64> {
        self.improvement[m as usize]
    }
}

pub fn summarize(ours: &[ClassMetrics], base: &[ClassMetrics]) -> Report {
    let (o, b) = (mean_metrics(ours), mean_metrics(base));
    Report::from_means(o, b)
}

impl Report {
    pub fn from_means(ours: MeanMetrics, base: MeanMetrics) -> Self {
        let improvement = Metric::ALL.map(|m| match (base.mean.get(m), ours.mean.get(m)) {
            (Some(b), Some(o)) => improvement_pct(b, o),
            _ => None,
        });
        Self {
            ours,
            base,
            improvement,
        }
    }
}

/// Per-class average of per-frame metrics, each over the frames where it is defined.
pub fn macro_average(frames: &[[ClassMetrics; 4]]) -> [ClassMetrics; 4] {
    let mut out = [ClassMetrics::default(); 4];
    for (k, o) in out.iter_mut().enumerate() {
        let column: Vec<ClassMetrics> = frames.iter().map(|f| f[k]).collect();
        *o = mean_metrics(&column).mean;
    }
    out
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn csv_row(s: &mut String, name: &str, vals: [Option<f64>; 4], fmt: &dyn Fn(Option<f64>) -> String) {
    let _ = writeln!(
        s,
        "{name},{},{},{},{}",
        fmt(vals[0]),
        fmt(vals[1]),
        fmt(vals[2]),
        fmt(vals[3])
    );
}

/// CSV with one row per class and a `mean` row. Undefined values are empty cells.
pub fn metrics_csv(ours: &[ClassMetrics; 4]) -> String {
    let mut s = String::from("class,precision,recall,f1,iou\n");
    for (label, m) in SemanticLabel::CLASSES.iter().zip(ours) {
        csv_row(&mut s, label.name(), Metric::ALL.map(|x| m.get(x)), &cell);
    }
    let mean = mean_metrics(ours).mean;
    csv_row(&mut s, "mean", Metric::ALL.map(|x| mean.get(x)), &cell);
    s
}

/// [`metrics_csv`] followed by `baseline_mean` and `improvement_pct` rows.
pub fn report_csv(ours: &[ClassMetrics; 4], report: &Report) -> String {
    let mut s = String::from("class,precision,recall,f1,iou\n");
    let mut row =
        |name: &str, vals: [Option<f64>; 4], fmt: &dyn Fn(Option<f64>) -> String| csv_row(&mut s, name, vals, fmt);
    for (label, m) in SemanticLabel::CLASSES.iter().zip(ours) {
        row(label.name(), Metric::ALL.map(|x| m.get(x)), &cell);
    }
    row("mean", Metric::ALL.map(|x| report.ours.mean.get(x)), &cell);
    row("baseline_mean", Metric::ALL.map(|x| report.base.mean.get(x)), &cell);
    row("improvement_pct", report.improvement, &|v| {
        v.map(|x| format!("{:.2}", round2(x))).unwrap_or_default()
    });
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use SemanticLabel::*;

    #[test]
    fn perfect_prediction() {
        let labels: Vec<_> = (0..100).map(|i| SemanticLabel::CLASSES[i % 4]).collect();
        let c = confusion(&labels, &labels).unwrap();
        for k in c.classes {
            assert_eq!((k.tp, k.fp, k.fn_), (25, 0, 0));
        }
    }

    #[test]
    fn single_mislabel() {
        let c = confusion(&[Ground], &[Obstacle]).unwrap();
        assert_eq!(c.classes[0].fp, 1);
        assert_eq!(c.classes[1].fn_, 1);
        assert_eq!(c.classes[2].tn, 1);
    }

    #[test]
    fn undefined_reference_is_excluded() {
        let c = confusion(&[Ground, Ground], &[Undefined, Ground]).unwrap();
        assert_eq!((c.evaluated, c.excluded), (1, 1));
        assert_eq!(c.classes[0].total(), 1);
    }

    #[test]
    fn disjoint_maps() {
        let a = BTreeMap::from([(1, Ground)]);
        let b = BTreeMap::from([(2, Ground)]);
        assert!(matches!(confusion_maps(&a, &b), Err(Error::DisjointDomains)));
        assert!(confusion_maps(&a, &a).is_ok());
    }

    #[test]
    fn random_labels_match_tally_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pred: Vec<_> = (0..500)
            .map(|_| SemanticLabel::CLASSES[rng.random_range(0..4)])
            .collect();
        let gt: Vec<_> = (0..500)
            .map(|_| SemanticLabel::CLASSES[rng.random_range(0..4)])
            .collect();
        let c = confusion(&pred, &gt).unwrap();
        // full 4x4 matrix, reference by row
        let mut m = [[0u64; 4]; 4];
        for (p, g) in pred.iter().zip(&gt) {
            m[SemanticLabel::CLASSES.iter().position(|c| c == g).unwrap()]
                [SemanticLabel::CLASSES.iter().position(|c| c == p).unwrap()] += 1;
        }
        #[allow(clippy::needless_range_loop)] // confusion matrix, indexed both ways
        for k in 0..4 {
            let tp = m[k][k];
            let fp = (0..4).filter(|&g| g != k).map(|g| m[g][k]).sum();
            let fn_ = (0..4).filter(|&q| q != k).map(|q| m[k][q]).sum();
            assert_eq!(
                c.classes[k],
                ClassCounts {
                    tp,
                    fp,
                    fn_,
                    tn: 500 - tp - fp - fn_
                }
            );
        }
    }

    #[test]
    fn formula_examples() {
        let m = class_metrics(&ClassCounts {
            tp: 9,
            fp: 1,
            fn_: 1,
            tn: 0,
        });
        assert_abs_diff_eq!(m.precision.unwrap(), 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(m.recall.unwrap(), 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(m.f1.unwrap(), 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(m.iou.unwrap(), 9.0 / 11.0, epsilon = 1e-12);
        assert_eq!(class_metrics(&ClassCounts::default()), ClassMetrics::default());
        let z = class_metrics(&ClassCounts {
            tp: 0,
            fp: 5,
            fn_: 3,
            tn: 2,
        });
        assert_eq!(z, ClassMetrics::new(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(round2(improvement_pct(0.608, 0.725).unwrap()), 19.24);
        assert_eq!(round2(improvement_pct(0.751, 0.838).unwrap()), 11.58);
        assert_eq!(round2(improvement_pct(0.910, 0.925).unwrap()), 1.65);
        let same = [ClassMetrics::new(0.5, 0.6, 0.7, 0.4); 4];
        let r = summarize(&same, &same);
        assert!(r.improvement.iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn undefined_class_left_out_of_mean() {
        let mut ours = [ClassMetrics::new(0.8, 0.8, 0.8, 0.6); 4];
        ours[3] = ClassMetrics::default();
        let m = mean_metrics(&ours);
        assert_abs_diff_eq!(m.mean.iou.unwrap(), 0.6, epsilon = 1e-12);
        assert_eq!(m.excluded_classes, 1);
    }

    #[test]
    fn macro_average_skips_undefined_frames() {
        let a = [ClassMetrics::new(1.0, 1.0, 1.0, 1.0); 4];
        let mut b = [ClassMetrics::new(0.5, 0.5, 0.5, 0.5); 4];
        b[2] = ClassMetrics::default();
        let m = macro_average(&[a, b]);
        assert_eq!(m[0].iou, Some(0.75));
        assert_eq!(m[2].iou, Some(1.0));
    }

    #[test]
    fn csv_layout() {
        let ours = [ClassMetrics::new(0.9, 0.9, 0.9, 0.8); 4];
        let base = [ClassMetrics::new(0.8, 0.8, 0.8, 0.7); 4];
        let csv = report_csv(&ours, &summarize(&ours, &base));
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "class,precision,recall,f1,iou");
        assert!(lines[1].starts_with("ground,0.900000"));
        assert_eq!(lines[7], "improvement_pct,12.50,12.50,12.50,14.29");
    }

    proptest! {
        #[test]
        fn metric_identities(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
            let m = class_metrics(&ClassCounts { tp, fp, fn_, tn: 0 });
            if let (Some(p), Some(r), Some(f1), Some(iou)) = (m.precision, m.recall, m.f1, m.iou) {
                if p + r > 0.0 {
                    prop_assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
                }
                prop_assert!(iou <= p.min(r) + 1e-12);
                prop_assert!(iou <= f1 + 1e-12 && f1 <= 1.0);
                prop_assert!((f1 - 2.0 * iou / (1.0 + iou)).abs() < 1e-12);
            }
        }

        #[test]
        fn point_order_does_not_matter(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pairs: Vec<_> = (0..200)
                .map(|_| (SemanticLabel::CLASSES[rng.random_range(0..4)], SemanticLabel::CLASSES[rng.random_range(0..4)]))
                .collect();
            let split = |v: &[(SemanticLabel, SemanticLabel)]| -> (Vec<_>, Vec<_>) { v.iter().copied().unzip() };
            let (p, g) = split(&pairs);
            let a = confusion(&p, &g).unwrap();
            pairs.shuffle(&mut rng);
            let (p, g) = split(&pairs);
            prop_assert_eq!(a, confusion(&p, &g).unwrap());
        }
    }
}
