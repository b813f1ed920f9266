//! Classic dense autoencoder on curves discretized to a fixed grid.
//!
//! Irregular curves are aligned to the shared grid: unobserved positions are
//! fed as zeros and excluded from the loss. Reconstructions exist only on the
//! grid; asking for any other time point is an error, not an interpolation.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{
    batch_loss_and_gradient, train_network, Activation, BatchObjective, DenseLayer, Network, NetworkGrads, TrainConfig,
};
use crate::sample::FunctionalSample;

/// Curve values on the shared grid with an observation mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedVector {
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl MaskedVector {
    /// Values at unobserved positions are forced to zero.
    pub fn new(mut values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::arg("values and mask differ in length"));
        }
        for (v, &m) in values.iter_mut().zip(&mask) {
            if !m {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::arg("observed values must be finite"));
            }
        }
        Ok(MaskedVector { values, mask })
    }

    pub fn fully_observed(values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        MaskedVector::new(values, mask)
    }

    /// Places each observation of `sample` on its grid position.
    pub fn from_sample(sample: &FunctionalSample, grid: &[f64]) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        let mut mask = vec![false; grid.len()];
        for (&t, &v) in sample.times().iter().zip(sample.values()) {
            let j = grid_index(grid, t).ok_or_else(|| {
                Error::arg(alloc::format!("observation time {t} is not on the autoencoder grid"))
            })?;
            values[j] = v;
            mask[j] = true;
        }
        Ok(MaskedVector { values, mask })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn observed(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Index of `t` in the sorted `grid`, tolerating rounding noise.
pub fn grid_index(grid: &[f64], t: f64) -> Option<usize> {
    let span = match (grid.first(), grid.last()) {
        (Some(a), Some(b)) => (b - a).abs().max(1.0),
        _ => return None,
    };
    let tol = 1e-9 * span;
    let pos = grid.partition_point(|&g| g < t - tol);
    (pos < grid.len() && (grid[pos] - t).abs() <= tol).then_some(pos)
}

fn default_init_sd() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation_index: Option<usize>,
    #[serde(default = "default_init_sd")]
    pub init_sd: f64,
    #[serde(default)]
    pub train: TrainConfig,
}

impl AeConfig {
    pub fn new(hidden_sizes: Vec<usize>, activation: Activation) -> Self {
        AeConfig {
            hidden_sizes,
            activation,
            representation_index: None,
            init_sd: default_init_sd(),
            train: TrainConfig::default(),
        }
    }

    pub fn representation_layer(&self) -> Result<usize> {
        let n = self.hidden_sizes.len();
        match self.representation_index {
            Some(i) if i < n => Ok(i),
            Some(i) => Err(Error::config(alloc::format!(
                "representation_index {i} out of range for {n} hidden layers"
            ))),
            None if n % 2 == 1 => Ok(n / 2),
            None => Err(Error::config(
                "an even number of hidden layers requires an explicit representation_index",
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::config("hidden_sizes must be non-empty and positive"));
        }
        if !(self.init_sd >= 0.0 && self.init_sd.is_finite()) {
            return Err(Error::config("init_sd must be nonnegative"));
        }
        self.representation_layer()?;
        self.train.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeModel {
    config: AeConfig,
    grid: Vec<f64>,
    network: Network,
}

#[derive(Debug, Clone)]
pub struct TrainedAe {
    pub model: AeModel,
    pub history: Vec<f64>,
}

struct MaskedObjective<'a> {
    data: &'a [MaskedVector],
}

impl BatchObjective for MaskedObjective<'_> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn input(&self, i: usize) -> &[f64] {
        &self.data[i].values
    }

    fn loss_and_output_grad(&self, i: usize, output: &[f64], grad: &mut [f64]) -> f64 {
        masked_sse(&self.data[i], output, grad)
    }
}

/// `Σ_{observed j} (y_j − x_j)²`; writes its gradient into `grad`.
fn masked_sse(target: &MaskedVector, output: &[f64], grad: &mut [f64]) -> f64 {
    let mut loss = 0.0;
    for (((&x, &m), &y), g) in target.values.iter().zip(&target.mask).zip(output).zip(grad) {
        if m {
            let r = y - x;
            loss += r * r;
            *g = 2.0 * r;
        } else {
            *g = 0.0;
        }
    }
    loss
}

impl AeModel {
    pub fn init(config: AeConfig, grid: Vec<f64>) -> Result<Self> {
        Self::build(config, grid, true)
    }

    pub fn zeros(config: AeConfig, grid: Vec<f64>) -> Result<Self> {
        Self::build(config, grid, false)
    }

    fn build(config: AeConfig, grid: Vec<f64>, random: bool) -> Result<Self> {
        config.validate()?;
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("grid must be non-empty and strictly increasing"));
        }
        let j = grid.len();
        let act = config.activation;
        let sd = if random { config.init_sd } else { 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed ^ 0xAE_5EED);
        let mut dims = vec![j];
        dims.extend_from_slice(&config.hidden_sizes);
        let mut layers = Vec::with_capacity(dims.len());
        for w in dims.windows(2) {
            layers.push(DenseLayer::random(w[0], w[1], true, act, sd, &mut rng)?);
        }
        layers.push(DenseLayer::random(dims[dims.len() - 1], j, true, Activation::Identity, sd, &mut rng)?);
        Ok(AeModel {
            config,
            grid,
            network: Network::new(layers)?,
        })
    }

    pub fn config(&self) -> &AeConfig {
        &self.config
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn num_params(&self) -> usize {
        self.network.num_params()
    }

    fn check_input(&self, input: &MaskedVector) -> Result<()> {
        if input.len() != self.grid.len() {
            return Err(Error::arg(alloc::format!(
                "input has {} positions, model grid has {}",
                input.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    pub fn encode(&self, input: &MaskedVector) -> Result<Vec<f64>> {
        self.check_input(input)?;
        self.network.forward_upto(&input.values, self.config.representation_layer()?)
    }

    /// Reconstruction on the full model grid.
    pub fn reconstruct(&self, input: &MaskedVector) -> Result<Vec<f64>> {
        self.check_input(input)?;
        self.network.forward(&input.values)
    }

    /// Mean masked squared error over a dataset (loss normalization as in training).
    pub fn loss(&self, data: &[MaskedVector]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::arg("empty dataset"));
        }
        let mut grad = vec![0.0; self.grid.len()];
        let mut total = 0.0;
        for d in data {
            let out = self.reconstruct(d)?;
            total += masked_sse(d, &out, &mut grad);
        }
        Ok(total / data.len() as f64)
    }

    /// Mean masked loss over `data` and its gradient for every parameter.
    pub fn loss_and_gradient(&self, data: &[MaskedVector]) -> Result<(f64, NetworkGrads)> {
        for d in data {
            self.check_input(d)?;
        }
        let idx: Vec<usize> = (0..data.len()).collect();
        batch_loss_and_gradient(&self.network, &MaskedObjective { data }, &idx)
    }

    /// Reconstruction of `sample` at `eval_times`, which must lie on the grid.
    pub fn reconstruct_at(&self, sample: &FunctionalSample, eval_times: &[f64]) -> Result<Vec<f64>> {
        let idx = eval_times
            .iter()
            .map(|&t| {
                grid_index(&self.grid, t).ok_or_else(|| {
                    Error::Unsupported(alloc::format!(
                        "a discrete autoencoder has no output at t = {t} off its grid"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let full = self.reconstruct(&MaskedVector::from_sample(sample, &self.grid)?)?;
        Ok(idx.into_iter().map(|j| full[j]).collect())
    }

    pub fn encode_sample(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        self.encode(&MaskedVector::from_sample(sample, &self.grid)?)
    }
}

/// Trains on masked vectors laid out on `grid`.
pub fn train(data: &[MaskedVector], grid: Vec<f64>, config: &AeConfig) -> Result<TrainedAe> {
    train_with_callback(data, grid, config, |_, _, _| {})
}

pub fn train_with_callback<F>(data: &[MaskedVector], grid: Vec<f64>, config: &AeConfig, mut on_epoch: F) -> Result<TrainedAe>
where
    F: FnMut(usize, f64, &AeModel),
{
    if data.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    let mut model = AeModel::init(config.clone(), grid)?;
    for d in data {
        model.check_input(d)?;
    }
    let objective = MaskedObjective { data };
    let (cfg, grid) = (model.config.clone(), model.grid.clone());
    let history = train_network(&mut model.network, &objective, &config.train, |epoch, loss, net| {
        let snapshot = AeModel {
            config: cfg.clone(),
            grid: grid.clone(),
            network: net.clone(),
        };
        on_epoch(epoch, loss, &snapshot);
    })?;
    Ok(TrainedAe { model, history })
}
