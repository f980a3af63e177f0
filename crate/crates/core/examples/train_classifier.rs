//! Train the classifier on autoencoder embeddings and score every app.

use intent_ids::autoencoder::encode_features;
use intent_ids::nn::{OptimizerKind, TrainConfig};
use intent_ids::synth::{sample_corpus, GeneratorSpec};
use intent_ids::{
    build_mlp, build_sae, build_vocabulary, predict, split_train_validation, train_ae, train_mlp, vectorize, AEConfig,
    MLPConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = sample_corpus(&GeneratorSpec::with_signal(200, 200, 32, 8, 11))?.to_corpus();
    let vocab = build_vocabulary(&corpus)?;
    let features = split_train_validation(vectorize(&corpus, &vocab, true), 0.7, 11)?;

    let ae_config = AEConfig::new(vec![16], 8, TrainConfig::new(80, 32, 11)).with_optimizer(OptimizerKind::Rmsprop);
    let (ae, _) = train_ae(build_sae(features.n_cols(), &ae_config)?, &features)?;
    let embeddings = encode_features(&ae, &features)?;

    let mlp_config = MLPConfig::new(vec![16, 16], TrainConfig::new(100, 32, 12)).with_optimizer(OptimizerKind::Adam);
    let mlp = build_mlp(embeddings.dim(), &mlp_config)?;
    let (mlp, history) = train_mlp(mlp, &embeddings, &features.labels, &features.split)?;
    println!(
        "{} epochs, {} steps, final val BCE {:.4}",
        history.epochs(),
        history.steps,
        history.final_val_loss().unwrap_or(f64::NAN)
    );

    let scores = predict(&mlp, &embeddings)?.with_labels(features.labels.clone());
    for i in 0..5 {
        println!(
            "{:<12} {:.4} ({})",
            scores.app_ids[i],
            scores.scores[i],
            scores.labels[i].as_str()
        );
    }
    Ok(())
}
