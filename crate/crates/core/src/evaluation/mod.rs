//! Metrics, experiment harness and report writers.

mod bench;
mod experiments;
mod report;

pub use bench::{bench, BenchReport, LATENCY_TARGET_MS, MODEL_SIZE_BUDGET_BYTES};
pub use experiments::{
    ablation_report, committee_pipelines, evaluate_baseline, evaluate_pipeline, generalization_matrix, od_gating_table,
    threshold_table, time_sweep, time_sweep_frames, train_baseline, train_on_subset, training_size_sweep,
    DisagreementRow, EvalReport, GatingRow, GeneralizationRow, OdBeforeRate, SizePoint, ThresholdRow, TimePoint,
    DEFAULT_TRAINING_SIZES,
};
pub use report::{roc_svg, write_csv, write_json, write_text};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One operating point: scores `>= threshold` are called positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Points are ordered by increasing threshold, from `(1, 1)` at the lowest
/// score to `(0, 0)` at `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn require_both_classes(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Experiment("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite);
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::Experiment("ROC needs both classes".into()));
    }
    Ok((pos, neg))
}

/// ROC over every distinct score with trapezoidal AUC. Equal scores enter
/// the curve together, so ties contribute half credit.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    let (pos, neg) = require_both_classes(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().expect("seeded with the origin");
        let point = RocPoint {
            threshold,
            tpr: tp as f64 / pos as f64,
            fpr: fp as f64 / neg as f64,
        };
        auc += (point.fpr - prev.fpr) * (point.tpr + prev.tpr) / 2.0;
        points.push(point);
    }
    points.reverse();
    Ok(Roc { points, auc })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts with `score >= threshold` called positive.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// The operating point with every positive detected: threshold at the lowest
/// positive score and the FPR it implies.
pub fn fpr_at_full_recall(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    require_both_classes(scores, labels)?;
    let threshold = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .fold(f64::INFINITY, f64::min);
    Ok((threshold, confusion(scores, labels, threshold).fpr()))
}
