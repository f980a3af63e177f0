//! Fit a stacked autoencoder on intent vectors and inspect the embedding.

use intent_ids::autoencoder::encode_features;
use intent_ids::nn::{OptimizerKind, TrainConfig};
use intent_ids::synth::{sample_corpus, GeneratorSpec};
use intent_ids::{build_sae, build_vocabulary, split_train_validation, train_ae, vectorize, AEConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = sample_corpus(&GeneratorSpec::with_signal(200, 200, 48, 8, 3))?.to_corpus();
    let vocab = build_vocabulary(&corpus)?;
    let features = split_train_validation(vectorize(&corpus, &vocab, true), 0.7, 3)?;

    let config = AEConfig::new(vec![32, 16], 8, TrainConfig::new(60, 32, 3)).with_optimizer(OptimizerKind::Rmsprop);
    let ae = build_sae(features.n_cols(), &config)?;
    let (ae, history) = train_ae(ae, &features)?;
    for (epoch, (tr, va)) in history.train_loss.iter().zip(&history.val_loss).enumerate().step_by(10) {
        println!("epoch {:>3}  train {tr:.5}  val {va:.5}", epoch + 1);
    }

    let embeddings = encode_features(&ae, &features)?;
    println!("{} inputs -> {} dimensions", ae.input_dim(), embeddings.dim());
    println!("{}: {:?}", embeddings.app_ids[0], embeddings.values.row(0));
    Ok(())
}
