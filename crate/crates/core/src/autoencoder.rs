//! Stacked autoencoders that compress sparse intent vectors into dense
//! embeddings.
//!
//! The encoder is `input -> hidden_layers... -> embedding` (ReLU hidden,
//! linear embedding); the decoder mirrors the hidden widths back to the input
//! width with a sigmoid output. Encoder and decoder are trained jointly on
//! the reconstruction MSE.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{FeatureMatrix, Split};
use crate::nn::{
    fit, Activation, Dataset, LossKind, Matrix, ModelDocument, ModelMeta, Network, NnError, OptimizerConfig,
    OptimizerKind, OptimizerState, TrainConfig, TrainHistory,
};

#[derive(Debug, Error)]
pub enum AutoencoderError {
    #[error("encoder widths must be non-increasing from input {input_dim}: {widths:?}")]
    ConstraintViolation { input_dim: usize, widths: Vec<usize> },
    #[error("features have no train/validation split")]
    NotSplit,
    #[error("model is not an autoencoder (missing encoder_layer_count)")]
    NotAnAutoencoder,
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AEConfig {
    pub hidden_layers: Vec<usize>,
    pub embedding_dim: usize,
    pub train: TrainConfig,
    pub optimizer: OptimizerConfig,
}

impl AEConfig {
    pub fn new(hidden_layers: Vec<usize>, embedding_dim: usize, train: TrainConfig) -> Self {
        AEConfig {
            hidden_layers,
            embedding_dim,
            train,
            optimizer: OptimizerKind::Adadelta.into(),
        }
    }

    pub fn with_optimizer(mut self, optimizer: impl Into<OptimizerConfig>) -> Self {
        self.optimizer = optimizer.into();
        self
    }

    /// Short hash identifying this configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn check(&self, input_dim: usize) -> Result<(), AutoencoderError> {
        let mut chain = vec![input_dim];
        chain.extend(&self.hidden_layers);
        chain.push(self.embedding_dim);
        let ok = chain.iter().all(|&w| w > 0) && chain.windows(2).all(|w| w[0] >= w[1]);
        if ok {
            Ok(())
        } else {
            Err(AutoencoderError::ConstraintViolation {
                input_dim,
                widths: chain[1..].to_vec(),
            })
        }
    }
}

/// An autoencoder network with its encoder/decoder boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub net: Network,
    pub encoder_layers: usize,
    pub config: AEConfig,
}

impl Autoencoder {
    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.net.layers[self.encoder_layers - 1].out_dim()
    }

    pub fn encoder(&self) -> Network {
        Network {
            layers: self.net.layers[..self.encoder_layers].to_vec(),
        }
    }

    pub fn decoder(&self) -> Network {
        Network {
            layers: self.net.layers[self.encoder_layers..].to_vec(),
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument::from_network(
            &self.net,
            ModelMeta {
                seed: self.config.train.seed,
                config: serde_json::to_value(&self.config).expect("config serializes"),
                encoder_layer_count: Some(self.encoder_layers),
            },
        )
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self, AutoencoderError> {
        let encoder_layers = doc.meta.encoder_layer_count.ok_or(AutoencoderError::NotAnAutoencoder)?;
        let net = doc.to_network()?;
        if encoder_layers == 0 || encoder_layers >= net.layers.len() {
            return Err(AutoencoderError::NotAnAutoencoder);
        }
        let config = serde_json::from_value(doc.meta.config.clone())
            .map_err(|e| NnError::Model(format!("autoencoder config: {e}")))?;
        Ok(Autoencoder {
            net,
            encoder_layers,
            config,
        })
    }
}

/// Symmetric encoder/decoder stack, Glorot-initialized from `config.train.seed`.
pub fn build_sae(input_dim: usize, config: &AEConfig) -> Result<Autoencoder, AutoencoderError> {
    config.check(input_dim)?;
    let mut dims = vec![input_dim];
    dims.extend(&config.hidden_layers);
    dims.push(config.embedding_dim);
    dims.extend(config.hidden_layers.iter().rev());
    dims.push(input_dim);

    let encoder_layers = config.hidden_layers.len() + 1;
    let mut activations = vec![Activation::Relu; config.hidden_layers.len()];
    activations.push(Activation::Linear);
    activations.extend(vec![Activation::Relu; config.hidden_layers.len()]);
    activations.push(Activation::Sigmoid);

    let net = Network::build(&dims, &activations, config.train.seed)?;
    Ok(Autoencoder {
        net,
        encoder_layers,
        config: config.clone(),
    })
}

/// Reconstruction training on the Train rows; validation loss is the
/// per-feature mean squared error on the Validation rows.
pub fn train_ae(
    mut ae: Autoencoder,
    features: &FeatureMatrix,
) -> Result<(Autoencoder, TrainHistory), AutoencoderError> {
    if !features.is_split() {
        return Err(AutoencoderError::NotSplit);
    }
    let train_x = features.values.select_rows(&features.indices_of(Split::Train));
    let val_x = features.values.select_rows(&features.indices_of(Split::Validation));

    let mut train_cfg = ae.config.train.clone();
    train_cfg.loss.get_or_insert(LossKind::Mse);
    let mut optimizer = OptimizerState::new(ae.config.optimizer.resolve(), &ae.net);
    let history = fit(
        &mut ae.net,
        Dataset::new(&train_x, &train_x)?,
        Some(Dataset::new(&val_x, &val_x)?),
        &train_cfg,
        &mut optimizer,
    )?;
    Ok((ae, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub app_ids: Vec<String>,
    pub values: Matrix,
    pub source_config: String,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// CSV `app_id,e0,...,e{d-1}`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["app_id".to_string()];
        header.extend((0..self.dim()).map(|j| format!("e{j}")));
        w.write_record(&header)?;
        for (id, row) in self.app_ids.iter().zip(self.values.row_iter()) {
            let mut record = vec![id.clone()];
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the encoder half on every row.
pub fn encode(ae: &Autoencoder, app_ids: &[String], features: &Matrix) -> Result<EmbeddingMatrix, AutoencoderError> {
    let values = ae.encoder().predict(features)?;
    Ok(EmbeddingMatrix {
        app_ids: app_ids.to_vec(),
        values,
        source_config: ae.config.fingerprint(),
    })
}

pub fn encode_features(ae: &Autoencoder, features: &FeatureMatrix) -> Result<EmbeddingMatrix, AutoencoderError> {
    encode(ae, &features.app_ids, &features.values)
}

/// Decoder applied to embeddings.
pub fn decode(ae: &Autoencoder, embeddings: &Matrix) -> Result<Matrix, AutoencoderError> {
    Ok(ae.decoder().predict(embeddings)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Label;

    fn cfg(hidden: Vec<usize>, embedding: usize) -> AEConfig {
        AEConfig::new(hidden, embedding, TrainConfig::new(1, 16, 3))
    }

    #[test]
    fn deep_encoder_dims() {
        let ae = build_sae(273, &cfg(vec![128, 64], 32)).unwrap();
        assert_eq!(ae.net.dims(), vec![273, 128, 64, 32, 64, 128, 273]);
        assert_eq!(ae.encoder_layers, 3);
        assert_eq!(ae.embedding_dim(), 32);
        let acts: Vec<Activation> = ae.net.layers.iter().map(|l| l.activation).collect();
        use Activation::*;
        assert_eq!(acts, [Relu, Relu, Linear, Relu, Relu, Sigmoid]);
    }

    #[test]
    fn single_bottleneck() {
        let ae = build_sae(10, &cfg(vec![], 10)).unwrap();
        assert_eq!(ae.net.dims(), vec![10, 10, 10]);
    }

    #[test]
    fn widening_rejected() {
        assert!(matches!(
            build_sae(273, &cfg(vec![64, 128], 32)),
            Err(AutoencoderError::ConstraintViolation { .. })
        ));
        assert!(build_sae(16, &cfg(vec![32], 8)).is_err());
        assert!(build_sae(16, &cfg(vec![8], 0)).is_err());
    }

    #[test]
    fn zero_input_gives_bias_constant() {
        let mut ae = build_sae(6, &cfg(vec![4], 2)).unwrap();
        ae.net.layers[0].bias = vec![0.5, -0.5, 1.0, 0.0];
        ae.net.layers[1].bias = vec![0.25, -0.75];
        let ids: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let emb = encode(&ae, &ids, &Matrix::zeros(3, 6)).unwrap();
        let w = &ae.net.layers[1].weights;
        // relu(bias) through the linear embedding layer
        let h = [0.5, 0.0, 1.0, 0.0];
        for r in 0..3 {
            for o in 0..2 {
                let expected = ae.net.layers[1].bias[o] + (0..4).map(|j| w[(o, j)] * h[j]).sum::<f64>();
                assert!((emb.values[(r, o)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn document_round_trip() {
        let ae = build_sae(8, &cfg(vec![6], 3)).unwrap();
        let doc = ae.to_document();
        assert_eq!(doc.meta.encoder_layer_count, Some(2));
        let back = Autoencoder::from_document(&ModelDocument::from_json(&doc.to_json()).unwrap()).unwrap();
        assert_eq!(back, ae);
    }

    #[test]
    fn unsplit_features_rejected() {
        let ae = build_sae(2, &cfg(vec![], 1)).unwrap();
        let features = FeatureMatrix {
            app_ids: vec!["a".into()],
            labels: vec![Label::Benign],
            values: Matrix::zeros(1, 2),
            binarized: true,
            split: vec![],
            columns: vec![],
            dropped_unknown: 0,
        };
        assert!(matches!(train_ae(ae, &features), Err(AutoencoderError::NotSplit)));
    }

    #[test]
    fn embedding_csv() {
        let emb = EmbeddingMatrix {
            app_ids: vec!["a".into()],
            values: Matrix::from_rows(&[[0.5, -1.0]]),
            source_config: String::new(),
        };
        let mut buf = Vec::new();
        emb.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "app_id,e0,e1\na,0.5,-1\n");
    }
}
