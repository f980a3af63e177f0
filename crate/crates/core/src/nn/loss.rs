use serde::{Deserialize, Serialize};

use super::Matrix;

/// Probabilities are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]` before the log.
pub const BCE_EPSILON: f64 = 1e-7;

/// Losses are averaged over every element of the batch (rows x columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    #[serde(alias = "binary_crossentropy")]
    Bce,
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON)
}

impl LossKind {
    pub fn value(self, prediction: &Matrix, target: &Matrix) -> f64 {
        let n = prediction.as_slice().len();
        if n == 0 {
            return 0.0;
        }
        let pairs = prediction.as_slice().iter().zip(target.as_slice());
        let total: f64 = match self {
            LossKind::Mse => pairs.map(|(y, t)| (y - t) * (y - t)).sum(),
            LossKind::Bce => pairs
                .map(|(&y, &t)| {
                    let p = clamp_probability(y);
                    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                })
                .sum(),
        };
        total / n as f64
    }

    /// Gradient of [`LossKind::value`] with respect to the prediction.
    pub fn gradient(self, prediction: &Matrix, target: &Matrix) -> Matrix {
        let n = prediction.as_slice().len().max(1) as f64;
        let data = prediction
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(&y, &t)| match self {
                LossKind::Mse => 2.0 * (y - t) / n,
                LossKind::Bce => {
                    // flat outside the clamp interval
                    if !(BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&y) {
                        0.0
                    } else {
                        (y - t) / (y * (1.0 - y)) / n
                    }
                }
            })
            .collect();
        Matrix::from_vec(prediction.rows(), prediction.cols(), data)
    }
}
