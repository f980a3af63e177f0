//! ROC curve, AUC and the three threshold policies on a fixed score list.

use intent_ids::{evaluate, metrics_at_threshold, Label, ScoreVector, ThresholdPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scores = vec![0.95, 0.9, 0.8, 0.7, 0.62, 0.55, 0.45, 0.4, 0.3, 0.2, 0.1, 0.05];
    let labels = [1, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 0]
        .iter()
        .map(|&m| if m == 1 { Label::Malicious } else { Label::Benign })
        .collect();
    let sv = ScoreVector::from_scores(scores, labels);

    let (report, roc) = evaluate(&sv)?;
    println!("AUC {:.4} (trapezoid {:.4})", roc.auc, roc.trapezoid_auc());
    for p in &roc.points {
        println!("  t={:<6} fpr={:.3} tpr={:.3}", p.threshold, p.fpr, p.tpr);
    }
    for policy in ThresholdPolicy::ALL {
        let r = report.policy(policy);
        println!(
            "{policy:?}: t={:.3} acc={:.3} fpr={:.3} f1={:.3}",
            r.threshold, r.accuracy, r.fpr, r.f1
        );
    }
    let m = metrics_at_threshold(&sv, 0.35)?;
    println!(
        "manual t=0.35: acc={:.3} precision={:.3} recall={:.3}",
        m.accuracy, m.precision, m.recall
    );
    Ok(())
}
