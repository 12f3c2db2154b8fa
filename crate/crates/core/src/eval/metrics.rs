use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(labels: &[bool], predictions: &[bool]) -> Result<Self> {
        check_len(labels.len(), predictions.len(), "predictions")?;
        let mut m = Self::default();
        for (&l, &p) in labels.iter().zip(predictions) {
            match (l, p) {
                (true, true) => m.tp += 1,
                (false, true) => m.fp += 1,
                (true, false) => m.fn_ += 1,
                (false, false) => m.tn += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &Self) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

/// Which ratios hit 0/0 and were reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1
    }
}

/// Positive-class metrics. `roc_auc` is `None` when the labels hold a
/// single class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: Option<f64>,
    pub degenerate: Degenerate,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn check_len(expected: usize, found: usize, what: &str) -> Result<()> {
    if expected != found {
        return Err(Error::Data(format!("{found} {what} for {expected} labels")));
    }
    Ok(())
}

impl MetricSet {
    /// Threshold metrics from the counts; AUC supplied separately.
    pub fn from_confusion(cm: &ConfusionMatrix, roc_auc: Option<f64>) -> Self {
        let (accuracy, _) = ratio(cm.tp + cm.tn, cm.total());
        let (precision, dp) = ratio(cm.tp, cm.tp + cm.fp);
        let (recall, dr) = ratio(cm.tp, cm.tp + cm.fn_);
        let (f1, df) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        Self {
            accuracy,
            precision,
            recall,
            f1,
            roc_auc,
            degenerate: Degenerate {
                precision: dp,
                recall: dr,
                f1: df,
            },
        }
    }
}

pub fn compute_metrics(
    labels: &[bool],
    predictions: &[bool],
    scores: &[f64],
) -> Result<(MetricSet, ConfusionMatrix)> {
    check_len(labels.len(), scores.len(), "scores")?;
    let cm = ConfusionMatrix::from_predictions(labels, predictions)?;
    let auc = match roc_auc(labels, scores) {
        Ok(a) => Some(a),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((MetricSet::from_confusion(&cm, auc), cm))
}

fn score_order(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Normalized Mann–Whitney statistic from midranks of tie groups.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    check_len(labels.len(), scores.len(), "scores")?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "roc_auc needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| score_order(scores[a], scores[b]));
    // sum of 2*rank over positives keeps everything integral
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, midrank doubled = start + 1 + end
        let twice_mid = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        start = end;
    }
    let p = n_pos as u128;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Rows scoring at or above this are called positive; `None` for the
    /// origin point.
    pub threshold: Option<f64>,
}

/// ROC curve vertices from the strictest threshold down, starting at (0, 0).
pub fn roc_points(labels: &[bool], scores: &[f64]) -> Result<Vec<RocPoint>> {
    check_len(labels.len(), scores.len(), "scores")?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("roc curve needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| score_order(scores[b], scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: Some(s),
        });
    }
    Ok(points)
}

/// Mean and population standard deviation over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    /// `None` when no fold had both classes.
    pub roc_auc: Option<MeanStd>,
    /// Folds whose AUC was undefined and left out.
    pub auc_skipped: usize,
    /// Folds with at least one 0/0 ratio.
    pub degenerate_folds: usize,
}

impl MetricSummary {
    pub fn of(sets: &[MetricSet]) -> Result<Self> {
        let pick = |f: fn(&MetricSet) -> f64| {
            MeanStd::of(&sets.iter().map(f).collect::<Vec<_>>())
                .ok_or_else(|| Error::Data("no folds to summarize".into()))
        };
        let aucs: Vec<f64> = sets.iter().filter_map(|s| s.roc_auc).collect();
        Ok(Self {
            accuracy: pick(|s| s.accuracy)?,
            precision: pick(|s| s.precision)?,
            recall: pick(|s| s.recall)?,
            f1: pick(|s| s.f1)?,
            roc_auc: MeanStd::of(&aucs),
            auc_skipped: sets.len() - aucs.len(),
            degenerate_folds: sets.iter().filter(|s| s.degenerate.any()).count(),
        })
    }

    /// Per-metric means packed back into a set, for stacking one level up.
    pub fn means(&self) -> MetricSet {
        MetricSet {
            accuracy: self.accuracy.mean,
            precision: self.precision.mean,
            recall: self.recall.mean,
            f1: self.f1.mean,
            roc_auc: self.roc_auc.map(|a| a.mean),
            degenerate: Degenerate::default(),
        }
    }
}
