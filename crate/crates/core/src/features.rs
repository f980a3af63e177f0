//! Frozen intent vocabularies and fixed-width feature matrices.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::{IntentError, IntentKey};
use crate::manifest::{Corpus, Label};
use crate::nn::Matrix;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("class `{label}` has {count} sample(s); at least 2 are needed to split")]
    ClassTooSmall { label: Label, count: usize },
    #[error("train fraction must be in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("feature CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature CSV line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    keys: Vec<IntentKey>,
    #[serde(skip)]
    index: HashMap<IntentKey, usize>,
    pub frozen_from: String,
}

impl Vocabulary {
    /// Keys are deduplicated and sorted by `(kind, name)`.
    pub fn from_keys(keys: impl IntoIterator<Item = IntentKey>, frozen_from: impl Into<String>) -> Self {
        let mut keys: Vec<IntentKey> = keys.into_iter().collect();
        keys.sort();
        keys.dedup();
        let index = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        Vocabulary {
            keys,
            index,
            frozen_from: frozen_from.into(),
        }
    }

    pub fn keys(&self) -> &[IntentKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn position(&self, key: &IntentKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Restores the lookup table after deserialization.
    pub fn reindexed(self) -> Self {
        Vocabulary::from_keys(self.keys, self.frozen_from)
    }
}

/// One key per distinct intent observed anywhere in the corpus.
pub fn build_vocabulary(corpus: &Corpus) -> Result<Vocabulary, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let keys = corpus.samples().iter().flat_map(|s| s.intents.keys().cloned());
    Ok(Vocabulary::from_keys(keys, corpus.fingerprint()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub app_ids: Vec<String>,
    pub labels: Vec<Label>,
    pub values: Matrix,
    pub binarized: bool,
    /// Empty until [`split_train_validation`] runs.
    pub split: Vec<Split>,
    /// Column keys, same order as the vocabulary the matrix came from.
    pub columns: Vec<IntentKey>,
    /// Intent occurrences dropped because their key is not in the vocabulary.
    pub dropped_unknown: u64,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.app_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_split(&self) -> bool {
        self.split.len() == self.n_rows() && self.n_rows() > 0
    }

    pub fn indices_of(&self, part: Split) -> Vec<usize> {
        self.split
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == part)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rows of one partition as a standalone matrix (split field cleared).
    pub fn subset(&self, part: Split) -> FeatureMatrix {
        let idx = self.indices_of(part);
        FeatureMatrix {
            app_ids: idx.iter().map(|&i| self.app_ids[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            values: self.values.select_rows(&idx),
            binarized: self.binarized,
            split: vec![part; idx.len()],
            columns: self.columns.clone(),
            dropped_unknown: 0,
        }
    }

    /// Column sums restricted to rows with the given label.
    pub fn column_sums(&self, label: Label) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols()];
        for (row, l) in self.values.row_iter().zip(&self.labels) {
            if *l == label {
                for (s, v) in sums.iter_mut().zip(row) {
                    *s += v;
                }
            }
        }
        sums
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_keys(self.columns.clone(), String::new())
    }

    /// Write `app_id,label,split,<key columns...>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["app_id".to_string(), "label".into(), "split".into()];
        header.extend(self.columns.iter().map(IntentKey::column_name));
        w.write_record(&header)?;
        for (i, row) in self.values.row_iter().enumerate() {
            let split = self.split.get(i).map(|s| s.as_str()).unwrap_or("");
            let mut record = vec![self.app_ids[i].clone(), self.labels[i].to_string(), split.to_string()];
            record.extend(row.iter().map(|v| format!("{}", *v as u64)));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| FeatureError::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<FeatureMatrix, FeatureError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "app_id" || &header[1] != "label" || &header[2] != "split" {
            return Err(FeatureError::Format {
                line: 1,
                message: "header must start with `app_id,label,split`".into(),
            });
        }
        let columns = header
            .iter()
            .skip(3)
            .map(IntentKey::parse_column)
            .collect::<Result<Vec<_>, _>>()?;

        let mut app_ids = Vec::new();
        let mut labels = Vec::new();
        let mut split = Vec::new();
        let mut data = Vec::new();
        let mut binarized = true;
        for record in r.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let fail = |message: String| FeatureError::Format { line, message };
            if record.len() != header.len() {
                return Err(fail(format!("expected {} fields, got {}", header.len(), record.len())));
            }
            app_ids.push(record[0].to_string());
            labels.push(
                record[1]
                    .parse::<Label>()
                    .map_err(|v| fail(format!("unknown label `{v}`")))?,
            );
            match &record[2] {
                "train" => split.push(Split::Train),
                "validation" => split.push(Split::Validation),
                "" => {}
                other => return Err(fail(format!("unknown split `{other}`"))),
            }
            for field in record.iter().skip(3) {
                let v: f64 = field.parse().map_err(|_| fail(format!("bad value `{field}`")))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(fail(format!("feature values must be non-negative, got `{field}`")));
                }
                binarized &= v == 0.0 || v == 1.0;
                data.push(v);
            }
        }
        if !split.is_empty() && split.len() != app_ids.len() {
            return Err(FeatureError::Format {
                line: 0,
                message: "split column is only partially filled".into(),
            });
        }
        let n = app_ids.len();
        Ok(FeatureMatrix {
            app_ids,
            labels,
            values: Matrix::from_vec(n, columns.len(), data),
            binarized,
            split,
            columns,
            dropped_unknown: 0,
        })
    }
}

/// Count (or presence) matrix of the corpus over a frozen vocabulary.
pub fn vectorize(corpus: &Corpus, vocab: &Vocabulary, binarize: bool) -> FeatureMatrix {
    let n = corpus.len();
    let mut values = Matrix::zeros(n, vocab.len());
    let mut dropped = 0u64;
    for (i, sample) in corpus.samples().iter().enumerate() {
        let row = values.row_mut(i);
        for (key, &count) in &sample.intents {
            match vocab.position(key) {
                Some(j) => row[j] = if binarize { count.min(1) as f64 } else { count as f64 },
                None => dropped += count as u64,
            }
        }
    }
    FeatureMatrix {
        app_ids: corpus.samples().iter().map(|s| s.app_id.clone()).collect(),
        labels: corpus.samples().iter().map(|s| s.label).collect(),
        values,
        binarized: binarize,
        split: Vec::new(),
        columns: vocab.keys().to_vec(),
        dropped_unknown: dropped,
    }
}

/// Stratified, seeded train/validation assignment.
///
/// Each label class is shuffled independently and cut at
/// `round(n * train_fraction)`, kept within `1..n` so both partitions get at
/// least one row of every class present.
pub fn split_train_validation(
    mut matrix: FeatureMatrix,
    train_fraction: f64,
    seed: u64,
) -> Result<FeatureMatrix, FeatureError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FeatureError::InvalidFraction(train_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = vec![Split::Validation; matrix.n_rows()];
    for label in [Label::Malicious, Label::Benign, Label::Unlabeled] {
        let mut members: Vec<usize> = (0..matrix.n_rows()).filter(|&i| matrix.labels[i] == label).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(FeatureError::ClassTooSmall {
                label,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let cut = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        for &i in &members[..cut] {
            split[i] = Split::Train;
        }
    }
    matrix.split = split;
    Ok(matrix)
}
