//! RMSProp, Adam and Adadelta with per-parameter accumulators.

use serde::{Deserialize, Serialize};

use super::network::{LayerGradient, Network};
use super::{Matrix, NnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adadelta,
    Adam,
    Rmsprop,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adadelta => "adadelta",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rmsprop => "rmsprop",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optimizer choice plus hyperparameters.
///
/// `rho` is the RMSProp/Adadelta decay. Adadelta scales its update by
/// `learning_rate`, which defaults to 1.0 (the plain learning-rate-free rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub rho: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerSpec {
    pub fn rmsprop() -> Self {
        OptimizerSpec {
            kind: OptimizerKind::Rmsprop,
            learning_rate: 0.001,
            rho: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn adam() -> Self {
        OptimizerSpec {
            kind: OptimizerKind::Adam,
            learning_rate: 0.001,
            rho: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn adadelta() -> Self {
        OptimizerSpec {
            kind: OptimizerKind::Adadelta,
            learning_rate: 1.0,
            rho: 0.95,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-6,
        }
    }

    pub fn default_for(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Adadelta => Self::adadelta(),
            OptimizerKind::Adam => Self::adam(),
            OptimizerKind::Rmsprop => Self::rmsprop(),
        }
    }
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::adadelta()
    }
}

/// Config-file form: only `kind` is required, missing values take the
/// kind's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl OptimizerConfig {
    pub fn resolve(&self) -> OptimizerSpec {
        let d = OptimizerSpec::default_for(self.kind);
        OptimizerSpec {
            kind: self.kind,
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            rho: self.rho.unwrap_or(d.rho),
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
        }
    }
}

impl From<OptimizerKind> for OptimizerConfig {
    fn from(kind: OptimizerKind) -> Self {
        OptimizerConfig {
            kind,
            learning_rate: None,
            rho: None,
            beta1: None,
            beta2: None,
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Slots {
    // rmsprop: mean square; adam: first moment; adadelta: mean square grad
    first: Vec<f64>,
    // adam: second moment; adadelta: mean square update
    second: Vec<f64>,
}

impl Slots {
    fn zeros(n: usize) -> Self {
        Slots {
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub spec: OptimizerSpec,
    step: u64,
    // one entry per layer: (weights, bias)
    slots: Vec<(Slots, Slots)>,
}

impl OptimizerState {
    pub fn new(spec: OptimizerSpec, net: &Network) -> Self {
        let slots = net
            .layers
            .iter()
            .map(|l| (Slots::zeros(l.weights.as_slice().len()), Slots::zeros(l.bias.len())))
            .collect();
        OptimizerState { spec, step: 0, slots }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Network, grads: &[LayerGradient]) -> Result<(), NnError> {
        if grads.len() != net.layers.len() || self.slots.len() != net.layers.len() {
            return Err(NnError::ShapeMismatch {
                expected: net.layers.len(),
                found: grads.len(),
            });
        }
        for (layer, g) in net.layers.iter().zip(grads) {
            if g.weights.shape() != layer.weights.shape() || g.bias.len() != layer.bias.len() {
                return Err(NnError::ShapeMismatch {
                    expected: layer.parameter_count(),
                    found: g.weights.as_slice().len() + g.bias.len(),
                });
            }
            if !g.weights.is_finite() || g.bias.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteGradient);
            }
        }

        self.step += 1;
        let spec = self.spec;
        let t = self.step;
        for ((layer, g), (w_slots, b_slots)) in net.layers.iter_mut().zip(grads).zip(&mut self.slots) {
            update(&spec, t, layer.weights.as_mut_slice(), g.weights.as_slice(), w_slots);
            update(&spec, t, &mut layer.bias, &g.bias, b_slots);
        }
        Ok(())
    }
}

fn update(spec: &OptimizerSpec, t: u64, params: &mut [f64], grads: &[f64], slots: &mut Slots) {
    match spec.kind {
        OptimizerKind::Rmsprop => {
            for ((w, &g), acc) in params.iter_mut().zip(grads).zip(&mut slots.first) {
                *acc = spec.rho * *acc + (1.0 - spec.rho) * g * g;
                *w -= spec.learning_rate * g / (acc.sqrt() + spec.epsilon);
            }
        }
        OptimizerKind::Adam => {
            let c1 = 1.0 - spec.beta1.powi(t as i32);
            let c2 = 1.0 - spec.beta2.powi(t as i32);
            for (((w, &g), m), v) in params
                .iter_mut()
                .zip(grads)
                .zip(&mut slots.first)
                .zip(&mut slots.second)
            {
                *m = spec.beta1 * *m + (1.0 - spec.beta1) * g;
                *v = spec.beta2 * *v + (1.0 - spec.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= spec.learning_rate * m_hat / (v_hat.sqrt() + spec.epsilon);
            }
        }
        OptimizerKind::Adadelta => {
            for (((w, &g), eg), ex) in params
                .iter_mut()
                .zip(grads)
                .zip(&mut slots.first)
                .zip(&mut slots.second)
            {
                *eg = spec.rho * *eg + (1.0 - spec.rho) * g * g;
                let delta = -((*ex + spec.epsilon).sqrt() / (*eg + spec.epsilon).sqrt()) * g;
                *ex = spec.rho * *ex + (1.0 - spec.rho) * delta * delta;
                *w += spec.learning_rate * delta;
            }
        }
    }
}

/// Gradients shaped like `net` with every entry zero.
pub fn zero_gradients(net: &Network) -> Vec<LayerGradient> {
    net.layers
        .iter()
        .map(|l| LayerGradient {
            weights: Matrix::zeros(l.out_dim(), l.in_dim()),
            bias: vec![0.0; l.out_dim()],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::{Activation, DenseLayer};

    fn scalar_net(w: f64) -> Network {
        Network::new(vec![DenseLayer {
            weights: Matrix::from_vec(1, 1, vec![w]),
            bias: vec![0.0],
            activation: Activation::Linear,
        }])
        .unwrap()
    }

    fn unit_grad() -> Vec<LayerGradient> {
        vec![LayerGradient {
            weights: Matrix::from_vec(1, 1, vec![1.0]),
            bias: vec![0.0],
        }]
    }

    fn first_step(spec: OptimizerSpec) -> f64 {
        let mut net = scalar_net(0.0);
        let mut opt = OptimizerState::new(spec, &net);
        opt.step(&mut net, &unit_grad()).unwrap();
        net.layers[0].weights[(0, 0)]
    }

    #[test]
    fn rmsprop_first_step() {
        let dw = first_step(OptimizerSpec::rmsprop());
        assert!((dw - (-0.001 / (0.1f64.sqrt() + 1e-8))).abs() < 1e-15);
        assert!((dw + 0.0031623).abs() < 1e-7);
    }

    #[test]
    fn adam_first_step() {
        let dw = first_step(OptimizerSpec::adam());
        assert!((dw + 0.001).abs() < 1e-10);
    }

    #[test]
    fn adadelta_first_step() {
        // E[g^2] = 0.05, E[dx^2] = 0 -> dx = -sqrt(1e-6) / sqrt(0.05 + 1e-6)
        let dw = first_step(OptimizerSpec::adadelta());
        let expected = -(1e-6f64).sqrt() / (0.05f64 + 1e-6).sqrt();
        assert!((dw - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        for spec in [
            OptimizerSpec::rmsprop(),
            OptimizerSpec::adam(),
            OptimizerSpec::adadelta(),
        ] {
            let mut net = Network::build(&[3, 2], &[Activation::Relu], 5).unwrap();
            let before = net.clone();
            let mut opt = OptimizerState::new(spec, &net);
            for _ in 0..3 {
                opt.step(&mut net, &zero_gradients(&before)).unwrap();
            }
            assert_eq!(net, before, "{:?}", spec.kind);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::new(OptimizerSpec::adam(), &net);
        let mut g = unit_grad();
        g[0].bias[0] = f64::NAN;
        assert!(matches!(opt.step(&mut net, &g), Err(NnError::NonFiniteGradient)));
        assert_eq!(opt.steps_taken(), 0);
        assert_eq!(net, scalar_net(1.0));
    }

    #[test]
    fn config_fills_defaults() {
        let cfg: OptimizerConfig = toml::from_str("kind = \"rmsprop\"\nlearning_rate = 0.01").unwrap();
        let spec = cfg.resolve();
        assert_eq!(spec.learning_rate, 0.01);
        assert_eq!(spec.rho, 0.9);
        assert_eq!(
            OptimizerConfig::from(OptimizerKind::Adadelta).resolve(),
            OptimizerSpec::adadelta()
        );
    }
}
