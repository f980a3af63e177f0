use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::network::Network;
use super::optim::OptimizerState;
use super::{Matrix, NnError};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// `None` lets the model pick its conventional loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossKind>,
    #[serde(default = "default_true")]
    pub shuffle_each_epoch: bool,
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            batch_size,
            seed,
            loss: None,
            shuffle_each_epoch: true,
        }
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = Some(loss);
        self
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.epochs == 0 {
            return Err(NnError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, n_train: usize) -> usize {
        steps_per_epoch(n_train, self.batch_size)
    }
}

/// Optimizer steps needed to cover `n_rows` once.
pub fn steps_per_epoch(n_rows: usize, batch_size: usize) -> usize {
    n_rows.div_ceil(batch_size.max(1))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    /// Empty when no validation set was given.
    pub val_loss: Vec<f64>,
    /// Seconds per epoch.
    #[serde(skip)]
    pub wall_time: Vec<f64>,
    pub steps: u64,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    pub fn final_val_loss(&self) -> Option<f64> {
        self.val_loss.last().copied()
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.train_loss.last().copied()
    }
}

/// Inputs with targets, row-aligned.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub inputs: &'a Matrix,
    pub targets: &'a Matrix,
}

impl<'a> Dataset<'a> {
    pub fn new(inputs: &'a Matrix, targets: &'a Matrix) -> Result<Self, NnError> {
        if inputs.rows() != targets.rows() {
            return Err(NnError::ShapeMismatch {
                expected: inputs.rows(),
                found: targets.rows(),
            });
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }
}

/// Mini-batch training. Each epoch reshuffles the training rows with a
/// generator seeded from `config.seed`, takes `ceil(n / batch_size)` steps,
/// and records the size-weighted mean batch loss plus the validation loss.
pub fn fit(
    net: &mut Network,
    train: Dataset<'_>,
    validation: Option<Dataset<'_>>,
    config: &TrainConfig,
    optimizer: &mut OptimizerState,
) -> Result<TrainHistory, NnError> {
    config.validate()?;
    if train.is_empty() {
        return Err(NnError::InvalidConfig("training set is empty".into()));
    }
    if train.inputs.cols() != net.input_dim() {
        return Err(NnError::ShapeMismatch {
            expected: net.input_dim(),
            found: train.inputs.cols(),
        });
    }
    if train.targets.cols() != net.output_dim() {
        return Err(NnError::ShapeMismatch {
            expected: net.output_dim(),
            found: train.targets.cols(),
        });
    }
    let loss = config.loss.unwrap_or(LossKind::Mse);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();

    for _ in 0..config.epochs {
        let started = Instant::now();
        if config.shuffle_each_epoch {
            order.shuffle(&mut rng);
        }
        let mut weighted = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = train.inputs.select_rows(chunk);
            let t = train.targets.select_rows(chunk);
            let pass = net.forward(&x)?;
            weighted += loss.value(pass.prediction(), &t) * chunk.len() as f64;
            let grads = net.backward(&pass, &t, loss)?;
            optimizer.step(net, &grads)?;
            history.steps += 1;
        }
        history.train_loss.push(weighted / train.len() as f64);
        if let Some(val) = validation.filter(|v| !v.is_empty()) {
            history.val_loss.push(net.loss(val.inputs, val.targets, loss)?);
        }
        history.wall_time.push(started.elapsed().as_secs_f64());
    }
    Ok(history)
}
