//! Implicit-intent malware detection toolkit.
//!
//! The pipeline reads apktool-decoded Android manifests, extracts the
//! actions and categories declared in `<intent-filter>` elements, turns
//! them into fixed-width vectors over a frozen vocabulary, compresses those
//! with a stacked autoencoder and scores apps with an MLP classifier.
//!
//! | module | role |
//! |---|---|
//! | [`intent`], [`manifest`] | intent keys, manifest parsing, corpus loading |
//! | [`features`] | vocabulary, feature matrices, stratified split |
//! | [`stats`] | per-class intent counts and normalized contrast |
//! | [`nn`] | dense layers, losses, optimizers, training loop |
//! | [`autoencoder`], [`classifier`] | embedding model and malware scorer |
//! | [`metrics`] | ROC/AUC and threshold policies |
//! | [`sweep`] | configuration grids and stage filtering |
//! | [`synth`] | synthetic corpora with known ground truth |
//! | [`cli`] | command implementations behind the `intent-ids` binary |

pub mod autoencoder;
pub mod classifier;
pub mod cli;
pub mod features;
pub mod intent;
pub mod manifest;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod stats;
pub mod sweep;
pub mod synth;

pub use autoencoder::{build_sae, encode, train_ae, AEConfig, Autoencoder, EmbeddingMatrix};
pub use classifier::{build_mlp, predict, train_mlp, Classifier, MLPConfig, ScoreVector};
pub use features::{build_vocabulary, split_train_validation, vectorize, FeatureMatrix, Split, Vocabulary};
pub use intent::{normalize_intent_name, IntentKey, IntentKind};
pub use manifest::{load_corpus, parse_manifest, AppSample, Corpus, Label};
pub use metrics::{
    evaluate, metrics_at_threshold, roc_auc, select_threshold, EvalReport, RocCurve, ThresholdPolicy, ThresholdReport,
};
pub use pipeline::{run_pipeline, PipelineOutcome};
pub use stats::{class_counts, normalized_difference, top_k, IntentStats, RankBy};
