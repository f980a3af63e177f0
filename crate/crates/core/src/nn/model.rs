//! JSON model documents:
//! `{"layers": [{"in", "out", "activation", "weights", "bias"}], "meta": {...}}`
//! with weights stored row-major (`out` rows of `in` values).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Activation, DenseLayer, Network};
use super::{Matrix, NnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    #[serde(rename = "in")]
    pub in_dim: usize,
    #[serde(rename = "out")]
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub config: serde_json::Value,
    /// Set on autoencoders: the first `n` layers form the encoder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder_layer_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub layers: Vec<LayerDocument>,
    pub meta: ModelMeta,
}

impl ModelDocument {
    pub fn from_network(net: &Network, meta: ModelMeta) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerDocument {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                activation: l.activation,
                weights: l.weights.as_slice().to_vec(),
                bias: l.bias.clone(),
            })
            .collect();
        ModelDocument { layers, meta }
    }

    pub fn to_network(&self) -> Result<Network, NnError> {
        let layers = self
            .layers
            .iter()
            .map(|d| {
                if d.weights.len() != d.in_dim * d.out_dim || d.bias.len() != d.out_dim {
                    return Err(NnError::ShapeMismatch {
                        expected: d.in_dim * d.out_dim + d.out_dim,
                        found: d.weights.len() + d.bias.len(),
                    });
                }
                let layer = DenseLayer {
                    weights: Matrix::from_vec(d.out_dim, d.in_dim, d.weights.clone()),
                    bias: d.bias.clone(),
                    activation: d.activation,
                };
                if !layer.is_finite() {
                    return Err(NnError::NonFiniteParameter);
                }
                Ok(layer)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Network::new(layers)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        serde_json::from_str(text).map_err(|e| NnError::Model(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()).map_err(|e| NnError::Model(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path).map_err(|e| NnError::Model(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
