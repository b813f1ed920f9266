use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GradientTape, Network, NetworkGrads, Optimizer, OptimizerConfig};
use crate::error::{Error, Result};

/// A per-sample loss attached to a network output.
pub trait BatchObjective {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Network input for sample `i`.
    fn input(&self, i: usize) -> &[f64];

    /// Loss of sample `i` for network output `output`; writes `∂loss/∂output`
    /// into `grad` (same length as `output`).
    fn loss_and_output_grad(&self, i: usize, output: &[f64], grad: &mut [f64]) -> f64;
}

fn default_batch_size() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Mini-batch size; 0 means full batch.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Seeds the per-epoch batch shuffling.
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: default_batch_size(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

/// Mean loss and mean gradient over the samples in `indices`.
pub fn batch_loss_and_gradient<O: BatchObjective + ?Sized>(
    net: &Network,
    objective: &O,
    indices: &[usize],
) -> Result<(f64, NetworkGrads)> {
    let mut grads = NetworkGrads::zeros_like(net);
    let mut tape = GradientTape::new();
    let mut out_grad = vec![0.0; net.output_dim()];
    let loss = accumulate(net, objective, indices, &mut tape, &mut out_grad, &mut grads)?;
    let n = indices.len().max(1) as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, grads))
}

/// Summed loss over `indices`; gradients are added to `grads` unscaled.
fn accumulate<O: BatchObjective + ?Sized>(
    net: &Network,
    objective: &O,
    indices: &[usize],
    tape: &mut GradientTape,
    out_grad: &mut [f64],
    grads: &mut NetworkGrads,
) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let output = net.forward_tape(objective.input(i), tape)?;
        out_grad.fill(0.0);
        total += objective.loss_and_output_grad(i, output, out_grad);
        net.backward(tape, out_grad, grads)?;
    }
    Ok(total)
}

/// Mini-batch training; returns the mean per-sample loss of every epoch.
///
/// `on_epoch(epoch, loss, net)` runs after each epoch with 1-based epoch
/// numbers. Batch order is shuffled from `config.seed`, so identical inputs
/// give bit-identical trajectories.
pub fn train_network<O, F>(
    net: &mut Network,
    objective: &O,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<Vec<f64>>
where
    O: BatchObjective + ?Sized,
    F: FnMut(usize, f64, &Network),
{
    let n = objective.len();
    if n == 0 {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    let mut optimizer = Optimizer::new(config.optimizer)?;
    let batch = if config.batch_size == 0 { n } else { config.batch_size.min(n) };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = NetworkGrads::zeros_like(net);
    let mut tape = GradientTape::new();
    let mut out_grad = vec![0.0; net.output_dim()];
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grads.zero();
            let loss = accumulate(net, objective, chunk, &mut tape, &mut out_grad, &mut grads)
                .map_err(|e| match e {
                    Error::NonFiniteActivation { .. } => Error::TrainingDiverged { epoch },
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += loss;
            grads.scale(1.0 / chunk.len() as f64);
            let g = grads.slices();
            let mut p = net.params_mut();
            optimizer.step(&mut p, &g).map_err(|e| match e {
                Error::NonFiniteGradient => Error::TrainingDiverged { epoch },
                other => other,
            })?;
        }
        if !net.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        let mean_loss = epoch_loss / n as f64;
        history.push(mean_loss);
        on_epoch(epoch, mean_loss, net);
    }
    Ok(history)
}
