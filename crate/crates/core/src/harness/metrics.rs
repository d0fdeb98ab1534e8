use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::imagecore::{LabelMap, Mask, ScoreMap};
use crate::{Error, Result};

fn pixels<'a>(
    pred: &'a LabelMap,
    gt: &'a LabelMap,
    mask: Option<&'a Mask>,
) -> Result<impl Iterator<Item = (i32, i32)> + 'a> {
    gt.ensure_dims(pred.dims())?;
    if let Some(m) = mask {
        gt.ensure_dims(m.dims())?;
    }
    Ok(pred
        .labels()
        .iter()
        .zip(gt.labels())
        .enumerate()
        .filter(move |&(i, (_, &g))| g != LabelMap::IGNORE && mask.is_none_or(|m| m.data()[i]))
        .map(|(_, (&p, &g))| (p, g)))
}

/// Fraction of eligible pixels whose labels match.
pub fn accuracy(pred: &LabelMap, gt: &LabelMap, mask: Option<&Mask>) -> Result<f64> {
    let (mut ok, mut n) = (0usize, 0usize);
    for (p, g) in pixels(pred, gt, mask)? {
        n += 1;
        ok += usize::from(p == g);
    }
    if n == 0 {
        return Err(Error::Degenerate("no eligible pixels to score".into()));
    }
    Ok(ok as f64 / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub voc: f64,
    pub f_measure: f64,
    pub dice: f64,
}

impl BinaryMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        if tp + fp + fn_ == 0 {
            return Self {
                voc: 1.0,
                f_measure: 1.0,
                dice: 1.0,
            };
        }
        let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            voc: tp / (tp + fp + fn_),
            f_measure,
            dice: 2.0 * tp / (2.0 * tp + fp + fn_),
        }
    }
}

/// VOC (Jaccard), F-measure and Dice of the `class` foreground.
pub fn class_metrics(
    pred: &LabelMap,
    gt: &LabelMap,
    mask: Option<&Mask>,
    class: i32,
) -> Result<BinaryMetrics> {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in pixels(pred, gt, mask)? {
        match (p == class, g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Ok(BinaryMetrics::from_counts(tp, fp, fn_))
}

/// Binary metrics with label 1 as foreground. Both foregrounds empty gives 1.
pub fn binary_metrics(
    pred: &LabelMap,
    gt: &LabelMap,
    mask: Option<&Mask>,
) -> Result<BinaryMetrics> {
    class_metrics(pred, gt, mask, LabelMap::POSITIVE)
}

fn pairs(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Standard (unadjusted) Rand index from the contingency table.
pub fn rand_index(pred: &LabelMap, gt: &LabelMap, mask: Option<&Mask>) -> Result<f64> {
    let mut table: HashMap<(i32, i32), u64> = HashMap::new();
    let mut rows: HashMap<i32, u64> = HashMap::new();
    let mut cols: HashMap<i32, u64> = HashMap::new();
    let mut n = 0u64;
    for (p, g) in pixels(pred, gt, mask)? {
        *table.entry((p, g)).or_default() += 1;
        *rows.entry(p).or_default() += 1;
        *cols.entry(g).or_default() += 1;
        n += 1;
    }
    if n < 2 {
        return Err(Error::Degenerate(
            "the Rand index needs at least two pixels".into(),
        ));
    }
    let total = pairs(n);
    let same_both: u128 = table.values().map(|&c| pairs(c)).sum();
    let same_pred: u128 = rows.values().map(|&c| pairs(c)).sum();
    let same_gt: u128 = cols.values().map(|&c| pairs(c)).sum();
    let agree = total + 2 * same_both - same_pred - same_gt;
    Ok(agree as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMetric {
    Accuracy,
    Voc,
}

impl std::str::FromStr for ThresholdMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Self::Accuracy),
            "voc" => Ok(Self::Voc),
            _ => Err(Error::Config(format!("unknown threshold metric `{s}`"))),
        }
    }
}

/// Labels `score > threshold` as 1 and everything else as -1.
pub fn threshold_labels(score: &ScoreMap, threshold: f64) -> LabelMap {
    let (w, h) = score.dims();
    let labels = score
        .plane
        .data()
        .iter()
        .map(|&s| {
            if s > threshold {
                LabelMap::POSITIVE
            } else {
                LabelMap::NEGATIVE
            }
        })
        .collect();
    LabelMap::new(w, h, labels).expect("dimensions come from a valid plane")
}

/// Threshold maximizing `metric` when foreground is `score > threshold`,
/// pooled over all images. Candidates are -inf, midpoints between
/// consecutive distinct scores and +inf; ties go to the larger threshold.
pub fn best_threshold_many(
    items: &[(&ScoreMap, &LabelMap, Option<&Mask>)],
    metric: ThresholdMetric,
) -> Result<(f64, f64)> {
    let mut v: Vec<(f64, bool)> = Vec::new();
    for (score, gt, mask) in items {
        gt.ensure_dims(score.dims())?;
        if let Some(m) = mask {
            gt.ensure_dims(m.dims())?;
        }
        for (i, (&s, &g)) in score.plane.data().iter().zip(gt.labels()).enumerate() {
            if g != LabelMap::IGNORE && mask.is_none_or(|m| m.data()[i]) {
                v.push((s, g == LabelMap::POSITIVE));
            }
        }
    }
    if v.is_empty() {
        return Err(Error::Degenerate("no eligible pixels to score".into()));
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = v.len();
    let npos = v.iter().filter(|p| p.1).count();
    let value = |tp: usize, fp: usize| -> f64 {
        let fn_ = npos - tp;
        match metric {
            ThresholdMetric::Accuracy => (tp + (n - npos - fp)) as f64 / n as f64,
            ThresholdMetric::Voc => BinaryMetrics::from_counts(tp, fp, fn_).voc,
        }
    };
    // every pixel starts as foreground
    let (mut tp, mut fp) = (npos, n - npos);
    let mut best = (f64::NEG_INFINITY, value(tp, fp));
    let mut i = 0;
    while i < n {
        let s = v[i].0;
        while i < n && v[i].0 == s {
            if v[i].1 {
                tp -= 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
        let tau = match v.get(i) {
            // adjacent floats have no midpoint; `s` itself splits them
            Some(&(next, _)) => Some(s + (next - s) / 2.0)
                .filter(|&t| t < next)
                .unwrap_or(s),
            None => f64::INFINITY,
        };
        let m = value(tp, fp);
        if m >= best.1 {
            best = (tau, m);
        }
    }
    Ok(best)
}

pub fn best_threshold(
    score: &ScoreMap,
    gt: &LabelMap,
    mask: Option<&Mask>,
    metric: ThresholdMetric,
) -> Result<(f64, f64)> {
    best_threshold_many(&[(score, gt, mask)], metric)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: i32,
    pub metrics: BinaryMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Positive-class metrics for binary maps, class means otherwise.
    pub voc: f64,
    pub f_measure: f64,
    pub dice: f64,
    pub rand_index: f64,
    pub per_class: Vec<ClassReport>,
    pub threshold: Option<f64>,
}

/// Every metric of a predicted label map. Binary problems (labels ±1)
/// report the positive class; others average over the ground-truth classes.
pub fn evaluate_labels(
    pred: &LabelMap,
    gt: &LabelMap,
    mask: Option<&Mask>,
) -> Result<MetricsReport> {
    let mut classes: Vec<i32> = pixels(pred, gt, mask)?.map(|(_, g)| g).collect();
    classes.sort_unstable();
    classes.dedup();
    let per_class = classes
        .iter()
        .map(|&c| {
            Ok(ClassReport {
                class: c,
                metrics: class_metrics(pred, gt, mask, c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let binary = classes
        .iter()
        .all(|&c| c == LabelMap::POSITIVE || c == LabelMap::NEGATIVE);
    let summary = if binary {
        binary_metrics(pred, gt, mask)?
    } else {
        let k = per_class.len() as f64;
        BinaryMetrics {
            voc: per_class.iter().map(|c| c.metrics.voc).sum::<f64>() / k,
            f_measure: per_class.iter().map(|c| c.metrics.f_measure).sum::<f64>() / k,
            dice: per_class.iter().map(|c| c.metrics.dice).sum::<f64>() / k,
        }
    };
    Ok(MetricsReport {
        accuracy: accuracy(pred, gt, mask)?,
        voc: summary.voc,
        f_measure: summary.f_measure,
        dice: summary.dice,
        rand_index: rand_index(pred, gt, mask)?,
        per_class,
        threshold: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::ImagePlane;

    fn lm(w: usize, v: &[i32]) -> LabelMap {
        LabelMap::new(w, v.len() / w, v.to_vec()).unwrap()
    }

    #[test]
    fn two_by_two_case() {
        let pred = lm(2, &[1, 1, 0, 0]);
        let gt = lm(2, &[1, 0, 0, 0]);
        assert_eq!(accuracy(&pred, &gt, None).unwrap(), 0.75);
        let m = binary_metrics(&pred, &gt, None).unwrap();
        assert_eq!(m.voc, 0.5);
        assert_eq!(m.f_measure, 2.0 / 3.0);
        assert_eq!(m.dice, 2.0 / 3.0);
    }

    #[test]
    fn empty_foregrounds_score_one() {
        let a = lm(2, &[-1, -1, -1, -1]);
        let m = binary_metrics(&a, &a, None).unwrap();
        assert_eq!((m.voc, m.f_measure, m.dice), (1.0, 1.0, 1.0));
    }

    #[test]
    fn three_pixel_rand_index() {
        let pred = lm(3, &[0, 0, 1]);
        let gt = lm(3, &[0, 1, 1]);
        assert_eq!(rand_index(&pred, &gt, None).unwrap(), 1.0 / 3.0);
        assert!(rand_index(&lm(1, &[0]), &lm(1, &[0]), None).is_err());
    }

    #[test]
    fn ignore_and_mask_are_skipped() {
        let pred = lm(2, &[1, -1, 1, 1]);
        let gt = lm(2, &[1, LabelMap::IGNORE, -1, 1]);
        let mask = Mask::new(2, 2, vec![true, true, false, true]).unwrap();
        assert_eq!(accuracy(&pred, &gt, Some(&mask)).unwrap(), 1.0);
        let none = Mask::new(2, 2, vec![false; 4]).unwrap();
        assert!(accuracy(&pred, &gt, Some(&none)).is_err());
    }

    #[test]
    fn threshold_on_label_scores_lies_between() {
        let s = ScoreMap::normalized(ImagePlane::new(4, 1, vec![1.0, -1.0, 1.0, -1.0]).unwrap())
            .unwrap();
        let gt = lm(4, &[1, -1, 1, -1]);
        for metric in [ThresholdMetric::Accuracy, ThresholdMetric::Voc] {
            let (t, v) = best_threshold(&s, &gt, None, metric).unwrap();
            assert!(t > -1.0 && t < 1.0);
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn constant_scores_pick_the_better_extreme() {
        let s = ScoreMap::raw(ImagePlane::filled(4, 1, 0.3).unwrap());
        let gt = lm(4, &[1, 1, 1, -1]);
        let (t, v) = best_threshold(&s, &gt, None, ThresholdMetric::Accuracy).unwrap();
        assert_eq!((t, v), (f64::NEG_INFINITY, 0.75));
        let gt = lm(4, &[1, -1, -1, -1]);
        let (t, v) = best_threshold(&s, &gt, None, ThresholdMetric::Accuracy).unwrap();
        assert_eq!((t, v), (f64::INFINITY, 0.75));
    }
}
