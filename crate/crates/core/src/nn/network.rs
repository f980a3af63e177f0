use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::{Matrix, NnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer computing `activation(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out_dim x in_dim`
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut layer = DenseLayer::zeros(in_dim, out_dim, activation);
        for w in layer.weights.as_mut_slice() {
            *w = rng.gen_range(-limit..=limit);
        }
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }

    /// `activation(X W^T + b)` for a batch `X` of shape `n x in_dim`.
    pub fn forward(&self, input: &Matrix) -> Result<Matrix, NnError> {
        if input.cols() != self.in_dim() {
            return Err(NnError::ShapeMismatch {
                expected: self.in_dim(),
                found: input.cols(),
            });
        }
        let mut out = Matrix::zeros(input.rows(), self.out_dim());
        for (i, x) in input.row_iter().enumerate() {
            let row = out.row_mut(i);
            for (o, (w, b)) in self.weights.row_iter().zip(&self.bias).enumerate() {
                let z = b + dot(w, x);
                row[o] = self.activation.apply(z);
            }
        }
        Ok(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Gradients of one layer, same shapes as its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Outputs of every layer for one batch; `outputs[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub outputs: Vec<Matrix>,
}

impl ForwardPass {
    pub fn prediction(&self) -> &Matrix {
        self.outputs.last().expect("forward pass always holds the input")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::EmptyNetwork);
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NnError::ShapeMismatch {
                    expected: pair[0].out_dim(),
                    found: pair[1].in_dim(),
                });
            }
        }
        Ok(Network { layers })
    }

    /// Glorot-initialized stack through `dims`, e.g. `[4, 8, 1]`.
    pub fn build(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self, NnError> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(NnError::EmptyNetwork);
        }
        if dims.contains(&0) {
            return Err(NnError::ZeroWidth);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &act)| DenseLayer::glorot(d[0], d[1], act, &mut rng))
            .collect();
        Network::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(DenseLayer::out_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::parameter_count).sum()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardPass, NnError> {
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(batch.clone());
        for layer in &self.layers {
            let next = layer.forward(outputs.last().unwrap())?;
            outputs.push(next);
        }
        Ok(ForwardPass { outputs })
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Matrix, NnError> {
        let mut current = self.layers[0].forward(batch)?;
        for layer in &self.layers[1..] {
            current = layer.forward(&current)?;
        }
        Ok(current)
    }

    /// Exact gradients of the batch-mean loss w.r.t. every weight and bias.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        targets: &Matrix,
        loss: LossKind,
    ) -> Result<Vec<LayerGradient>, NnError> {
        if pass.outputs.len() != self.layers.len() + 1 {
            return Err(NnError::ShapeMismatch {
                expected: self.layers.len() + 1,
                found: pass.outputs.len(),
            });
        }
        let prediction = pass.prediction();
        if prediction.shape() != targets.shape() {
            return Err(NnError::ShapeMismatch {
                expected: prediction.cols(),
                found: targets.cols(),
            });
        }

        let mut delta = loss.gradient(prediction, targets);
        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let output = &pass.outputs[l + 1];
            let input = &pass.outputs[l];
            // delta <- dL/dz
            for (d, &y) in delta.as_mut_slice().iter_mut().zip(output.as_slice()) {
                *d *= layer.activation.derivative_from_output(y);
            }

            let mut grad = LayerGradient {
                weights: Matrix::zeros(layer.out_dim(), layer.in_dim()),
                bias: vec![0.0; layer.out_dim()],
            };
            for (d_row, x) in delta.row_iter().zip(input.row_iter()) {
                for (o, &d) in d_row.iter().enumerate() {
                    if d != 0.0 {
                        grad.bias[o] += d;
                        axpy(d, x, grad.weights.row_mut(o));
                    }
                }
            }

            if l > 0 {
                let mut upstream = Matrix::zeros(input.rows(), layer.in_dim());
                for (i, d_row) in delta.row_iter().enumerate() {
                    let up = upstream.row_mut(i);
                    for (&d, w) in d_row.iter().zip(layer.weights.row_iter()) {
                        if d != 0.0 {
                            axpy(d, w, up);
                        }
                    }
                }
                delta = upstream;
            }
            grads.push(grad);
        }
        grads.reverse();
        Ok(grads)
    }

    pub fn loss(&self, inputs: &Matrix, targets: &Matrix, loss: LossKind) -> Result<f64, NnError> {
        let prediction = self.predict(inputs)?;
        if prediction.shape() != targets.shape() {
            return Err(NnError::ShapeMismatch {
                expected: prediction.cols(),
                found: targets.cols(),
            });
        }
        Ok(loss.value(&prediction, targets))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }
}
