//! Autoencoder then classifier, end to end on one split feature matrix.

use thiserror::Error;

use crate::autoencoder::{
    build_sae, encode_features, train_ae, AEConfig, Autoencoder, AutoencoderError, EmbeddingMatrix,
};
use crate::classifier::{build_mlp, predict, train_mlp, Classifier, ClassifierError, MLPConfig, ScoreVector};
use crate::features::{FeatureMatrix, Split};
use crate::metrics::{evaluate, EvalReport, MetricsError, RocCurve};
use crate::nn::TrainHistory;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("autoencoder: {0}")]
    Autoencoder(#[from] AutoencoderError),
    #[error("classifier: {0}")]
    Classifier(#[from] ClassifierError),
    #[error("evaluation: {0}")]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub autoencoder: Autoencoder,
    pub ae_history: TrainHistory,
    pub embeddings: EmbeddingMatrix,
    pub classifier: Classifier,
    pub mlp_history: TrainHistory,
    /// Scores for every row, labels attached.
    pub scores: ScoreVector,
    /// Validation-row metrics.
    pub report: EvalReport,
    pub roc: RocCurve,
}

impl PipelineOutcome {
    pub fn validation_scores(&self, features: &FeatureMatrix) -> ScoreVector {
        self.scores.select(&features.indices_of(Split::Validation))
    }
}

/// Train the autoencoder on the Train rows, embed every row, train the
/// classifier on the Train embeddings and evaluate on the Validation rows.
pub fn run_pipeline(
    features: &FeatureMatrix,
    ae_config: &AEConfig,
    mlp_config: &MLPConfig,
) -> Result<PipelineOutcome, PipelineError> {
    let ae = build_sae(features.n_cols(), ae_config)?;
    let (autoencoder, ae_history) = train_ae(ae, features)?;
    let embeddings = encode_features(&autoencoder, features)?;

    let mlp = build_mlp(embeddings.dim(), mlp_config)?;
    let (classifier, mlp_history) = train_mlp(mlp, &embeddings, &features.labels, &features.split)?;

    let scores = predict(&classifier, &embeddings)?.with_labels(features.labels.clone());
    let validation = scores.select(&features.indices_of(Split::Validation));
    let (report, roc) = evaluate(&validation)?;
    Ok(PipelineOutcome {
        autoencoder,
        ae_history,
        embeddings,
        classifier,
        mlp_history,
        scores,
        report,
        roc,
    })
}
