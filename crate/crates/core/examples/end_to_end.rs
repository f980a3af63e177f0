//! Corpus on disk -> features -> autoencoder -> classifier -> evaluation.

use intent_ids::nn::{OptimizerKind, TrainConfig};
use intent_ids::synth::{generate_corpus, GeneratorSpec};
use intent_ids::{
    build_vocabulary, load_corpus, run_pipeline, split_train_validation, vectorize, AEConfig, MLPConfig,
    ThresholdPolicy,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("intent-ids-end-to-end");
    let (_, paths) = generate_corpus(&GeneratorSpec::with_signal(200, 200, 32, 8, 2024), &dir)?;

    let corpus = load_corpus(&paths.manifest_dir, &paths.labels)?;
    let vocab = build_vocabulary(&corpus)?;
    let features = split_train_validation(vectorize(&corpus, &vocab, true), 0.7, 2024)?;
    println!("{} apps x {} intents", features.n_rows(), features.n_cols());

    let ae = AEConfig::new(vec![16, 8], 4, TrainConfig::new(200, 32, 2024)).with_optimizer(OptimizerKind::Rmsprop);
    let mlp =
        MLPConfig::new(vec![16, 16, 16, 16], TrainConfig::new(200, 32, 2024)).with_optimizer(OptimizerKind::Rmsprop);
    let outcome = run_pipeline(&features, &ae, &mlp)?;

    println!(
        "AE val MSE  {:.5}",
        outcome.ae_history.final_val_loss().unwrap_or(f64::NAN)
    );
    println!(
        "MLP val BCE {:.5}",
        outcome.mlp_history.final_val_loss().unwrap_or(f64::NAN)
    );
    println!("validation AUC {:.4}", outcome.report.auc);
    for policy in ThresholdPolicy::ALL {
        let r = outcome.report.policy(policy);
        println!(
            "{policy:?}: t={:.3} acc={:.4} fpr={:.4}",
            r.threshold, r.accuracy, r.fpr
        );
    }
    Ok(())
}
