//! MLP malware classifier over autoencoder embeddings.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoencoder::EmbeddingMatrix;
use crate::features::Split;
use crate::manifest::Label;
use crate::nn::{
    fit, Activation, Dataset, LossKind, Matrix, ModelDocument, ModelMeta, Network, NnError, OptimizerConfig,
    OptimizerKind, OptimizerState, TrainConfig, TrainHistory, BCE_EPSILON,
};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("classifier needs at least one hidden layer")]
    EmptyHiddenList,
    #[error("embedding dimension must be at least 1")]
    ZeroEmbedding,
    #[error("{what} has {found} rows, embeddings have {expected}")]
    Misaligned {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no labeled training rows")]
    NoTrainingRows,
    #[error("model output width is {0}, expected a single unit")]
    NotBinary(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLPConfig {
    pub hidden_layers: Vec<usize>,
    pub train: TrainConfig,
    pub optimizer: OptimizerConfig,
}

impl MLPConfig {
    pub fn new(hidden_layers: Vec<usize>, train: TrainConfig) -> Self {
        MLPConfig {
            hidden_layers,
            train,
            optimizer: OptimizerKind::Adadelta.into(),
        }
    }

    pub fn with_optimizer(mut self, optimizer: impl Into<OptimizerConfig>) -> Self {
        self.optimizer = optimizer.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub net: Network,
    pub config: MLPConfig,
}

impl Classifier {
    pub fn to_document(&self) -> ModelDocument {
        ModelDocument::from_network(
            &self.net,
            ModelMeta {
                seed: self.config.train.seed,
                config: serde_json::to_value(&self.config).expect("config serializes"),
                encoder_layer_count: None,
            },
        )
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self, ClassifierError> {
        let net = doc.to_network()?;
        if net.output_dim() != 1 {
            return Err(ClassifierError::NotBinary(net.output_dim()));
        }
        let config = serde_json::from_value(doc.meta.config.clone())
            .map_err(|e| NnError::Model(format!("classifier config: {e}")))?;
        Ok(Classifier { net, config })
    }
}

/// `embedding_dim -> hidden... -> 1`, ReLU hidden units and a sigmoid output.
pub fn build_mlp(embedding_dim: usize, config: &MLPConfig) -> Result<Classifier, ClassifierError> {
    if config.hidden_layers.is_empty() {
        return Err(ClassifierError::EmptyHiddenList);
    }
    if embedding_dim == 0 {
        return Err(ClassifierError::ZeroEmbedding);
    }
    let mut dims = vec![embedding_dim];
    dims.extend(&config.hidden_layers);
    dims.push(1);
    let mut activations = vec![Activation::Relu; config.hidden_layers.len()];
    activations.push(Activation::Sigmoid);
    // offset keeps the classifier init independent of an AE sharing the seed
    let net = Network::build(&dims, &activations, config.train.seed.wrapping_add(1))?;
    Ok(Classifier {
        net,
        config: config.clone(),
    })
}

fn labeled_rows(labels: &[Label], split: &[Split], part: Split) -> (Vec<usize>, Matrix) {
    let idx: Vec<usize> = (0..labels.len())
        .filter(|&i| split[i] == part && labels[i].target().is_some())
        .collect();
    let targets = idx.iter().map(|&i| labels[i].target().unwrap()).collect();
    let n = idx.len();
    (idx, Matrix::from_vec(n, 1, targets))
}

/// BCE training on labeled Train rows, validation loss on labeled
/// Validation rows.
pub fn train_mlp(
    mut model: Classifier,
    embeddings: &EmbeddingMatrix,
    labels: &[Label],
    split: &[Split],
) -> Result<(Classifier, TrainHistory), ClassifierError> {
    let n = embeddings.values.rows();
    for (what, len) in [("labels", labels.len()), ("split", split.len())] {
        if len != n {
            return Err(ClassifierError::Misaligned {
                what,
                expected: n,
                found: len,
            });
        }
    }
    let (train_idx, train_t) = labeled_rows(labels, split, Split::Train);
    if train_idx.is_empty() {
        return Err(ClassifierError::NoTrainingRows);
    }
    let (val_idx, val_t) = labeled_rows(labels, split, Split::Validation);
    let train_x = embeddings.values.select_rows(&train_idx);
    let val_x = embeddings.values.select_rows(&val_idx);

    let mut cfg = model.config.train.clone();
    cfg.loss.get_or_insert(LossKind::Bce);
    let mut optimizer = OptimizerState::new(model.config.optimizer.resolve(), &model.net);
    let history = fit(
        &mut model.net,
        Dataset::new(&train_x, &train_t)?,
        Some(Dataset::new(&val_x, &val_t)?),
        &cfg,
        &mut optimizer,
    )?;
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub app_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

impl ScoreVector {
    pub fn new(app_ids: Vec<String>, scores: Vec<f64>, labels: Vec<Label>) -> Self {
        assert_eq!(app_ids.len(), scores.len(), "ids and scores must align");
        assert_eq!(labels.len(), scores.len(), "labels and scores must align");
        ScoreVector {
            app_ids,
            scores,
            labels,
        }
    }

    /// Build from scores and labels with generated ids.
    pub fn from_scores(scores: Vec<f64>, labels: Vec<Label>) -> Self {
        let ids = (0..scores.len()).map(|i| i.to_string()).collect();
        Self::new(ids, scores, labels)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Self {
        assert_eq!(labels.len(), self.scores.len());
        self.labels = labels;
        self
    }

    pub fn select(&self, indices: &[usize]) -> ScoreVector {
        ScoreVector {
            app_ids: indices.iter().map(|&i| self.app_ids[i].clone()).collect(),
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Only rows with a malicious/benign label.
    pub fn labeled(&self) -> ScoreVector {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.labels[i] != Label::Unlabeled)
            .collect();
        self.select(&idx)
    }

    /// CSV `app_id,score,label`; scores printed to six decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["app_id", "score", "label"])?;
        for i in 0..self.len() {
            w.write_record([
                self.app_ids[i].as_str(),
                &format!("{:.6}", self.scores[i]),
                self.labels[i].as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Malware probability per row, clamped into `[1e-7, 1 - 1e-7]`.
pub fn predict(model: &Classifier, embeddings: &EmbeddingMatrix) -> Result<ScoreVector, ClassifierError> {
    let out = model.net.predict(&embeddings.values)?;
    let scores = out
        .as_slice()
        .iter()
        .map(|p| p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON))
        .collect();
    Ok(ScoreVector::new(
        embeddings.app_ids.clone(),
        scores,
        vec![Label::Unlabeled; embeddings.app_ids.len()],
    ))
}
