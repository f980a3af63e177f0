//! ROC curves, AUC and threshold policies for binary scores.
//!
//! Malicious is the positive class; a row is predicted positive when
//! `score >= threshold`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ScoreVector;
use crate::manifest::Label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("both classes are required (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("score {0} is not a finite number")]
    NonFiniteScore(f64),
}

/// Labeled `(score, is_positive)` pairs; unlabeled rows are skipped.
fn labeled_pairs(scores: &ScoreVector) -> Result<Vec<(f64, bool)>, MetricsError> {
    let mut pairs = Vec::with_capacity(scores.len());
    for (&s, &l) in scores.scores.iter().zip(&scores.labels) {
        if !s.is_finite() {
            return Err(MetricsError::NonFiniteScore(s));
        }
        match l {
            Label::Malicious => pairs.push((s, true)),
            Label::Benign => pairs.push((s, false)),
            Label::Unlabeled => {}
        }
    }
    Ok(pairs)
}

fn class_sizes(pairs: &[(f64, bool)]) -> (usize, usize) {
    let pos = pairs.iter().filter(|(_, p)| *p).count();
    (pos, pairs.len() - pos)
}

fn require_both(pairs: &[(f64, bool)]) -> Result<(usize, usize), MetricsError> {
    let (positives, negatives) = class_sizes(pairs);
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass { positives, negatives });
    }
    Ok((positives, negatives))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Descending threshold; the first point uses `+inf` and sits at (0, 0).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Trapezoidal area under the stored points.
    pub fn trapezoid_auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }

    /// CSV `threshold,fpr,tpr` with six decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["threshold", "fpr", "tpr"])?;
        for p in &self.points {
            w.write_record([
                format!("{:.6}", p.threshold),
                format!("{:.6}", p.fpr),
                format!("{:.6}", p.tpr),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// ROC curve with one point per distinct score, and the Mann-Whitney AUC:
/// the fraction of (positive, negative) pairs ranked correctly, ties
/// counting one half. Pair counts are accumulated in integers so the AUC is
/// a single rounding of the exact ratio.
pub fn roc_auc(scores: &ScoreVector) -> Result<RocCurve, MetricsError> {
    let mut pairs = labeled_pairs(scores)?;
    let (positives, negatives) = require_both(&pairs)?;
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0u64;
    let mut fp = 0u64;
    // twice the credited pair count: 2 per correctly ordered pair, 1 per tie
    let mut credit = 0u128;
    let mut i = 0;
    while i < pairs.len() {
        let score = pairs[i].0;
        let (mut group_pos, mut group_neg) = (0u64, 0u64);
        while i < pairs.len() && pairs[i].0 == score {
            if pairs[i].1 {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            i += 1;
        }
        // negatives in this group rank below every positive seen earlier
        credit += 2 * group_neg as u128 * tp as u128 + group_neg as u128 * group_pos as u128;
        tp += group_pos;
        fp += group_neg;
        points.push(RocPoint {
            threshold: score,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    let auc = credit as f64 / (2 * positives as u128 * negatives as u128) as f64;
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    fn at(pairs: &[(f64, bool)], threshold: f64) -> Self {
        let mut c = Confusion {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        for &(s, pos) in pairs {
            match (s >= threshold, pos) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn metrics(&self) -> ThresholdMetrics {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ThresholdMetrics {
            accuracy: ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_),
            fpr: ratio(self.fp, self.fp + self.tn),
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub accuracy: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion-matrix metrics at one threshold. Needs at least one negative
/// (for the FPR); with no positives recall and F1 are zero.
pub fn metrics_at_threshold(scores: &ScoreVector, threshold: f64) -> Result<ThresholdMetrics, MetricsError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(MetricsError::InvalidThreshold(threshold));
    }
    let pairs = labeled_pairs(scores)?;
    let (positives, negatives) = class_sizes(&pairs);
    if negatives == 0 {
        return Err(MetricsError::SingleClass { positives, negatives });
    }
    Ok(Confusion::at(&pairs, threshold).metrics())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdPolicy {
    Fixed05,
    BestAccuracy,
    BestF1,
}

impl ThresholdPolicy {
    pub const ALL: [ThresholdPolicy; 3] = [
        ThresholdPolicy::Fixed05,
        ThresholdPolicy::BestAccuracy,
        ThresholdPolicy::BestF1,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub policy: ThresholdPolicy,
    pub threshold: f64,
    pub accuracy: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ThresholdReport {
    fn new(policy: ThresholdPolicy, threshold: f64, m: ThresholdMetrics) -> Self {
        ThresholdReport {
            policy,
            threshold,
            accuracy: m.accuracy,
            fpr: m.fpr,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        }
    }
}

/// 0, 1, and the midpoints between adjacent distinct scores, ascending.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![0.0];
    candidates.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(1.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    candidates
}

/// Threshold chosen by a policy. Argmax ties resolve to the larger
/// threshold.
pub fn select_threshold(scores: &ScoreVector, policy: ThresholdPolicy) -> Result<ThresholdReport, MetricsError> {
    let pairs = labeled_pairs(scores)?;
    require_both(&pairs)?;
    if policy == ThresholdPolicy::Fixed05 {
        return Ok(ThresholdReport::new(policy, 0.5, Confusion::at(&pairs, 0.5).metrics()));
    }
    let objective = |m: &ThresholdMetrics| match policy {
        ThresholdPolicy::BestF1 => m.f1,
        _ => m.accuracy,
    };

    let raw: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut best: Option<(f64, ThresholdMetrics)> = None;
    // descending so the first maximum found is the largest threshold
    for &t in candidate_thresholds(&raw).iter().rev() {
        let m = Confusion::at(&pairs, t).metrics();
        if best.is_none_or(|(_, b)| objective(&m) > objective(&b)) {
            best = Some((t, m));
        }
    }
    let (t, m) = best.expect("candidate list is never empty");
    Ok(ThresholdReport::new(policy, t, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub thresholds: Vec<ThresholdReport>,
}

impl EvalReport {
    pub fn policy(&self, policy: ThresholdPolicy) -> &ThresholdReport {
        self.thresholds
            .iter()
            .find(|r| r.policy == policy)
            .expect("report holds every policy")
    }
}

/// AUC plus all three threshold policies.
pub fn evaluate(scores: &ScoreVector) -> Result<(EvalReport, RocCurve), MetricsError> {
    let curve = roc_auc(scores)?;
    let thresholds = ThresholdPolicy::ALL
        .iter()
        .map(|&p| select_threshold(scores, p))
        .collect::<Result<Vec<_>, _>>()?;
    let (positives, negatives) = class_sizes(&labeled_pairs(scores)?);
    Ok((
        EvalReport {
            auc: curve.auc,
            positives,
            negatives,
            thresholds,
        },
        curve,
    ))
}
