//! Per-class intent frequencies and the normalized class-contrast statistic.
//!
//! The contrast of an intent with `a` malicious and `b` benign occurrences is
//! the difference normalized by the pair's average frequency,
//! `2 (a - b) / (a + b)`, bounded in `[-2, 2]`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::intent::IntentKey;
use crate::manifest::{Corpus, Label};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("corpus has no `{0}` samples")]
    MissingClass(Label),
    #[error("normalized difference is undefined when both counts are zero")]
    BothZero,
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentStats {
    pub key: IntentKey,
    pub count_mal: u64,
    pub count_ben: u64,
    /// `None` when both counts are zero.
    pub norm_diff: Option<f64>,
}

impl IntentStats {
    pub fn new(key: IntentKey, count_mal: u64, count_ben: u64) -> Self {
        IntentStats {
            key,
            count_mal,
            count_ben,
            norm_diff: normalized_difference(count_mal, count_ben).ok(),
        }
    }
}

pub fn normalized_difference(count_mal: u64, count_ben: u64) -> Result<f64, StatsError> {
    if count_mal == 0 && count_ben == 0 {
        return Err(StatsError::BothZero);
    }
    let a = count_mal as f64;
    let b = count_ben as f64;
    Ok(2.0 * (a - b) / (a + b))
}

/// Total occurrences of every observed key per class, sorted by key.
pub fn class_counts(corpus: &Corpus) -> Result<Vec<IntentStats>, StatsError> {
    let labels = corpus.label_counts();
    for label in [Label::Malicious, Label::Benign] {
        if labels.get(label) == 0 {
            return Err(StatsError::MissingClass(label));
        }
    }
    let mut totals: BTreeMap<&IntentKey, (u64, u64)> = BTreeMap::new();
    for sample in corpus.samples() {
        for (key, &count) in &sample.intents {
            let entry = totals.entry(key).or_default();
            match sample.label {
                Label::Malicious => entry.0 += count as u64,
                Label::Benign => entry.1 += count as u64,
                Label::Unlabeled => {}
            }
        }
    }
    Ok(totals
        .into_iter()
        .filter(|(_, (m, b))| m + b > 0)
        .map(|(key, (m, b))| IntentStats::new(key.clone(), m, b))
        .collect())
}

/// Same as [`class_counts`] but from the columns of a feature matrix.
///
/// Keys whose column is all zero are skipped.
pub fn class_counts_from_features(features: &FeatureMatrix) -> Result<Vec<IntentStats>, StatsError> {
    for label in [Label::Malicious, Label::Benign] {
        if !features.labels.contains(&label) {
            return Err(StatsError::MissingClass(label));
        }
    }
    let mal = features.column_sums(Label::Malicious);
    let ben = features.column_sums(Label::Benign);
    let mut stats: Vec<IntentStats> = features
        .columns
        .iter()
        .zip(mal.iter().zip(&ben))
        .filter(|(_, (m, b))| **m + **b > 0.0)
        .map(|(key, (m, b))| IntentStats::new(key.clone(), *m as u64, *b as u64))
        .collect();
    stats.sort_by(|x, y| x.key.cmp(&y.key));
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankBy {
    CountMal,
    CountBen,
    NormDiffMal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedIntent {
    pub rank: usize,
    pub stats: IntentStats,
}

fn rank_value(s: &IntentStats, by: RankBy) -> Option<f64> {
    match by {
        RankBy::CountMal => Some(s.count_mal as f64),
        RankBy::CountBen => Some(s.count_ben as f64),
        RankBy::NormDiffMal => s.norm_diff,
    }
}

/// Descending ranking with competition ranks (ties share a rank, the next
/// distinct value skips ahead). Ties keep `(kind, name)` order. Entries with
/// no value for the field (undefined contrast) are left out.
pub fn top_k(stats: &[IntentStats], rank_by: RankBy, k: usize) -> Result<Vec<RankedIntent>, StatsError> {
    if k == 0 {
        return Err(StatsError::InvalidK);
    }
    let mut entries: Vec<(f64, &IntentStats)> = stats
        .iter()
        .filter_map(|s| rank_value(s, rank_by).map(|v| (v, s)))
        .collect();
    entries.sort_by(|(va, a), (vb, b)| vb.total_cmp(va).then_with(|| a.key.cmp(&b.key)));

    let mut ranked = Vec::with_capacity(k.min(entries.len()));
    let mut rank = 0;
    for (pos, (value, s)) in entries.iter().enumerate().take(k) {
        if pos == 0 || *value != entries[pos - 1].0 {
            rank = pos + 1;
        }
        ranked.push(RankedIntent {
            rank,
            stats: (*s).clone(),
        });
    }
    Ok(ranked)
}

/// CSV with columns `kind,name,count_mal,count_ben,norm_diff,rank`.
///
/// `norm_diff` uses six decimals and is left blank when undefined.
pub fn write_ranked_csv<W: Write>(rows: &[RankedIntent], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kind", "name", "count_mal", "count_ben", "norm_diff", "rank"])?;
    for r in rows {
        let s = &r.stats;
        w.write_record([
            s.key.kind.as_str().to_string(),
            s.key.name.clone(),
            s.count_mal.to_string(),
            s.count_ben.to_string(),
            s.norm_diff.map(|d| format!("{d:.6}")).unwrap_or_default(),
            r.rank.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
