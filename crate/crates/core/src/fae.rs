//! Functional autoencoder.
//!
//! ```text
//! X(t_j) ──feature layer──▶ f_m = Σ_j ω_j X(t_j) φ_m^(I)(t_j)        (fixed)
//!        ──input weights──▶ h^(1) = g(C^(I) f)                        (no bias)
//!        ──hidden stack───▶ h^(l) = g(W^(l) h^(l-1) + β^(l))
//!        ──output weights─▶ b = C^(O) h^(L)                           (linear)
//!        ──coefficient───▶ X̂(t) = Σ_m b_m φ_m^(O)(t)                 (fixed)
//! ```
//!
//! Row `k` of `C^(I)` holds the basis coefficients of the input weight
//! function `w_k^(I)(t) = Σ_m c_mk φ_m^(I)(t)`; column `k` of `C^(O)` holds
//! those of the output weight function. Only `C^(I)`, the hidden stack and
//! `C^(O)` are trained; both basis links are deterministic.
//!
//! The training objective sums squared residuals over each subject's own
//! observation times and divides by the number of subjects only:
//! `(1/N) Σ_i [Σ_j (X_ij − X̂_ij)² + λ Σ_{m≥3} (Δ² b_im)²]`. Reported
//! prediction error ([`crate::eval::mse_p`]) also divides by `J_i`.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::nncore::{
    batch_loss_and_gradient, train_network, Activation, BatchObjective, DenseLayer, Network, NetworkGrads,
    TrainConfig,
};
use crate::sample::FunctionalSample;

fn default_init_sd() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaeConfig {
    pub input_basis: BasisSystem,
    pub output_basis: BasisSystem,
    /// Neurons per hidden layer, `K^(1) … K^(L)`.
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    /// Index into `hidden_sizes` of the representation layer. Defaults to the
    /// middle layer, which requires an odd number of hidden layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation_index: Option<usize>,
    /// Weight of the second-difference roughness penalty on `b`.
    #[serde(default)]
    pub lambda: f64,
    /// Standard deviation of the Gaussian weight initialization.
    #[serde(default = "default_init_sd")]
    pub init_sd: f64,
    #[serde(default)]
    pub train: TrainConfig,
}

impl FaeConfig {
    /// Single representation layer of size `reps` between the two bases.
    pub fn new(input_basis: BasisSystem, output_basis: BasisSystem, hidden_sizes: Vec<usize>, activation: Activation) -> Self {
        FaeConfig {
            input_basis,
            output_basis,
            hidden_sizes,
            activation,
            representation_index: None,
            lambda: 0.0,
            init_sd: default_init_sd(),
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::config("hidden_sizes must be non-empty and positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be a nonnegative finite number"));
        }
        if self.lambda > 0.0 && self.output_basis.num_basis() < 3 {
            return Err(Error::config("a roughness penalty needs at least 3 output basis functions"));
        }
        if !(self.init_sd >= 0.0 && self.init_sd.is_finite()) {
            return Err(Error::config("init_sd must be nonnegative"));
        }
        self.representation_layer()?;
        self.train.optimizer.validate()
    }

    /// Index into `hidden_sizes` of the representation (bottleneck) layer.
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

    pub fn representation_dim(&self) -> Result<usize> {
        Ok(self.hidden_sizes[self.representation_layer()?])
    }
}

/// Trainable parameters plus the frozen basis configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaeModel {
    config: FaeConfig,
    /// `[input weights, hidden layers…, output weights]`.
    network: Network,
}

/// Everything produced by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FaeForward {
    pub representation: Vec<f64>,
    /// Coefficient-layer outputs `b_1 … b_{M^(O)}`.
    pub coefficients: Vec<f64>,
    /// `X̂` at the sample's own observation times.
    pub reconstruction: Vec<f64>,
}

/// `f_m = Σ_j ω_j X(t_j) φ_m(t_j)` with the sample's cached trapezoid weights.
pub fn feature_layer(sample: &FunctionalSample, input_basis: &BasisSystem) -> Result<Vec<f64>> {
    let mut features = vec![0.0; input_basis.num_basis()];
    let mut phi = vec![0.0; input_basis.num_basis()];
    let weights = sample.quadrature().weights();
    for ((&t, &x), &w) in sample.times().iter().zip(sample.values()).zip(weights) {
        input_basis.evaluate_into(t, &mut phi)?;
        let wx = w * x;
        for (f, p) in features.iter_mut().zip(&phi) {
            *f += wx * p;
        }
    }
    Ok(features)
}

/// `Σ_{m≥3} (b_m − 2 b_{m−1} + b_{m−2})²`.
pub fn second_difference_penalty(coeffs: &[f64]) -> f64 {
    coeffs.windows(3).map(|w| {
        let d = w[2] - 2.0 * w[1] + w[0];
        d * d
    }).sum()
}

/// Mean over the batch of squared reconstruction error plus `λ` times the
/// second-difference penalty of the coefficient layer.
pub fn penalized_loss(samples: &[FunctionalSample], forwards: &[FaeForward], lambda: f64) -> Result<f64> {
    if samples.len() != forwards.len() {
        return Err(Error::arg("forward results are not aligned with samples"));
    }
    if samples.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    if lambda > 0.0 && forwards.iter().any(|f| f.coefficients.len() < 3) {
        return Err(Error::config("a roughness penalty needs at least 3 coefficients"));
    }
    let mut total = 0.0;
    for (s, f) in samples.iter().zip(forwards) {
        if s.len() != f.reconstruction.len() {
            return Err(Error::arg("reconstruction length differs from the sample"));
        }
        let sse: f64 = s.values().iter().zip(&f.reconstruction).map(|(x, y)| (x - y) * (x - y)).sum();
        total += sse;
        if lambda > 0.0 {
            total += lambda * second_difference_penalty(&f.coefficients);
        }
    }
    Ok(total / samples.len() as f64)
}

/// A sample with its fixed feature vector and output design matrix.
struct Prepared {
    features: Vec<f64>,
    design: Matrix,
    values: Vec<f64>,
}

/// Training objective over prepared samples.
struct FaeObjective {
    samples: Vec<Prepared>,
    lambda: f64,
}

impl FaeObjective {
    fn new(samples: &[FunctionalSample], config: &FaeConfig) -> Result<Self> {
        let domain = config.input_basis.domain();
        let out_domain = config.output_basis.domain();
        let prepared = samples
            .iter()
            .map(|s| {
                s.check_domain(domain)?;
                s.check_domain(out_domain)?;
                Ok(Prepared {
                    features: feature_layer(s, &config.input_basis)?,
                    design: config.output_basis.design_matrix(s.times())?,
                    values: s.values().to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FaeObjective {
            samples: prepared,
            lambda: config.lambda,
        })
    }
}

impl BatchObjective for FaeObjective {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn input(&self, i: usize) -> &[f64] {
        &self.samples[i].features
    }

    fn loss_and_output_grad(&self, i: usize, b: &[f64], grad: &mut [f64]) -> f64 {
        let p = &self.samples[i];
        let mut loss = 0.0;
        for (j, &x) in p.values.iter().enumerate() {
            let row = p.design.row(j);
            let r = dot(row, b) - x;
            loss += r * r;
            for (g, &phi) in grad.iter_mut().zip(row) {
                *g += 2.0 * r * phi;
            }
        }
        if self.lambda > 0.0 {
            let lam = self.lambda;
            for m in 2..b.len() {
                let d = b[m] - 2.0 * b[m - 1] + b[m - 2];
                loss += lam * d * d;
                grad[m] += 2.0 * lam * d;
                grad[m - 1] -= 4.0 * lam * d;
                grad[m - 2] += 2.0 * lam * d;
            }
        }
        loss
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainedFae {
    pub model: FaeModel,
    /// Mean per-subject penalized loss after each epoch.
    pub history: Vec<f64>,
}

impl FaeModel {
    /// Randomly initialized model; weights `~ N(0, init_sd)`, biases zero.
    pub fn init(config: FaeConfig) -> Result<Self> {
        config.validate()?;
        let sd = config.init_sd;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed(config.train.seed));
        Self::build(config, |i, o, bias, act| DenseLayer::random(i, o, bias, act, sd, &mut rng))
    }

    /// Model with every parameter equal to zero.
    pub fn zeros(config: FaeConfig) -> Result<Self> {
        config.validate()?;
        Self::build(config, |i, o, bias, act| Ok(DenseLayer::zeros(i, o, bias, act)))
    }

    fn build(
        config: FaeConfig,
        mut make: impl FnMut(usize, usize, bool, Activation) -> Result<DenseLayer>,
    ) -> Result<Self> {
        let act = config.activation;
        let mut layers = Vec::with_capacity(config.hidden_sizes.len() + 1);
        layers.push(make(config.input_basis.num_basis(), config.hidden_sizes[0], false, act)?);
        for w in config.hidden_sizes.windows(2) {
            layers.push(make(w[0], w[1], true, act)?);
        }
        let last = *config.hidden_sizes.last().expect("validated non-empty");
        layers.push(make(last, config.output_basis.num_basis(), false, Activation::Identity)?);
        let network = Network::new(layers)?;
        Ok(FaeModel { config, network })
    }

    /// Assemble a model from explicit parameters.
    pub fn from_parts(config: FaeConfig, input_coeffs: Matrix, hidden: Vec<DenseLayer>, output_coeffs: Matrix) -> Result<Self> {
        config.validate()?;
        let mut model = Self::zeros(config)?;
        let n = model.network.layers.len();
        if hidden.len() != n - 2 {
            return Err(Error::arg("hidden layer count does not match hidden_sizes"));
        }
        let act = model.config.activation;
        let shapes_match = |a: &Matrix, b: &Matrix| a.rows() == b.rows() && a.cols() == b.cols();
        if !shapes_match(&input_coeffs, &model.network.layers[0].weight)
            || !shapes_match(&output_coeffs, &model.network.layers[n - 1].weight)
        {
            return Err(Error::arg("coefficient matrix shapes do not match the configuration"));
        }
        for (slot, layer) in model.network.layers[1..n - 1].iter_mut().zip(hidden) {
            if !shapes_match(&slot.weight, &layer.weight) || layer.activation != act {
                return Err(Error::arg("hidden layer does not match the configuration"));
            }
            *slot = layer;
        }
        model.network.layers[0].weight = input_coeffs;
        model.network.layers[n - 1].weight = output_coeffs;
        Ok(model)
    }

    pub fn config(&self) -> &FaeConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    /// `C^(I)`, shape `K^(1) × M^(I)`.
    pub fn input_coeffs(&self) -> &Matrix {
        &self.network.layers[0].weight
    }

    /// Dense layers between the first and last hidden layer.
    pub fn hidden_layers(&self) -> &[DenseLayer] {
        let n = self.network.layers.len();
        &self.network.layers[1..n - 1]
    }

    /// `C^(O)`, shape `M^(O) × K^(L)`.
    pub fn output_coeffs(&self) -> &Matrix {
        &self.network.layers[self.network.layers.len() - 1].weight
    }

    pub fn num_params(&self) -> usize {
        self.network.num_params()
    }

    /// `w_k^(I)(t) = Σ_m c_mk φ_m^(I)(t)`.
    pub fn input_weight_function(&self, k: usize, t: f64) -> Result<f64> {
        if k >= self.input_coeffs().rows() {
            return Err(Error::arg("input weight function index out of range"));
        }
        self.config.input_basis.combine(self.input_coeffs().row(k), t)
    }

    /// `w_k^(O)(t) = Σ_m c_mk φ_m^(O)(t)`.
    pub fn output_weight_function(&self, k: usize, t: f64) -> Result<f64> {
        let c = self.output_coeffs();
        if k >= c.cols() {
            return Err(Error::arg("output weight function index out of range"));
        }
        self.config.output_basis.combine(&c.column(k), t)
    }

    fn check_sample(&self, sample: &FunctionalSample) -> Result<()> {
        sample.check_domain(self.config.input_basis.domain())?;
        sample.check_domain(self.config.output_basis.domain())
    }

    pub fn forward(&self, sample: &FunctionalSample) -> Result<FaeForward> {
        self.check_sample(sample)?;
        let features = feature_layer(sample, &self.config.input_basis)?;
        let rep = self.config.representation_layer()?;
        let mut x = features;
        let mut representation = Vec::new();
        for (i, layer) in self.network.layers.iter().enumerate() {
            x = layer.forward(&x)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: i });
            }
            if i == rep {
                representation = x.clone();
            }
        }
        let reconstruction = self.config.output_basis.combine_many(&x, sample.times())?;
        Ok(FaeForward {
            representation,
            coefficients: x,
            reconstruction,
        })
    }

    /// Representation (bottleneck activations) of a sample.
    pub fn encode(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        self.check_sample(sample)?;
        let features = feature_layer(sample, &self.config.input_basis)?;
        self.network.forward_upto(&features, self.config.representation_layer()?)
    }

    /// Coefficient-layer output `b`.
    pub fn coefficients(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        self.check_sample(sample)?;
        let features = feature_layer(sample, &self.config.input_basis)?;
        self.network.forward(&features)
    }

    /// `X̂(t) = Σ_m b_m φ_m^(O)(t)` at arbitrary points of the output domain.
    pub fn smooth(&self, sample: &FunctionalSample, eval_times: &[f64]) -> Result<Vec<f64>> {
        let b = self.coefficients(sample)?;
        self.config.output_basis.combine_many(&b, eval_times)
    }

    /// Penalized loss and its gradient with respect to every trainable parameter.
    pub fn loss_and_gradient(&self, samples: &[FunctionalSample]) -> Result<(f64, NetworkGrads)> {
        let obj = FaeObjective::new(samples, &self.config)?;
        let idx: Vec<usize> = (0..samples.len()).collect();
        batch_loss_and_gradient(&self.network, &obj, &idx)
    }
}

/// Initialization draws from a stream distinct from batch shuffling.
fn init_seed(seed: u64) -> u64 {
    seed ^ 0x005E_ED0F_FAE0
}

/// Trains a freshly initialized model with `config.train`.
pub fn train(dataset: &[FunctionalSample], config: &FaeConfig) -> Result<TrainedFae> {
    train_with_callback(dataset, config, |_, _, _| {})
}

/// [`train`] with a hook called after every epoch with the current model.
pub fn train_with_callback<F>(dataset: &[FunctionalSample], config: &FaeConfig, mut on_epoch: F) -> Result<TrainedFae>
where
    F: FnMut(usize, f64, &FaeModel),
{
    if dataset.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    let mut model = FaeModel::init(config.clone())?;
    let objective = FaeObjective::new(dataset, config)?;
    let template = model.clone();
    let history = train_network(&mut model.network, &objective, &config.train, |epoch, loss, net| {
        let snapshot = FaeModel {
            config: template.config.clone(),
            network: net.clone(),
        };
        on_epoch(epoch, loss, &snapshot);
    })?;
    Ok(TrainedFae { model, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Domain;

    fn cfg(hidden: Vec<usize>, act: Activation) -> FaeConfig {
        FaeConfig::new(
            BasisSystem::cubic_unit(6).unwrap(),
            BasisSystem::cubic_unit(7).unwrap(),
            hidden,
            act,
        )
    }

    fn sample(j: usize, f: impl Fn(f64) -> f64) -> FunctionalSample {
        let t = Domain::unit().uniform_grid(j);
        let v = t.iter().map(|&x| f(x)).collect();
        FunctionalSample::new(t, v, None).unwrap()
    }

    #[test]
    fn zero_signal_gives_zero_features() {
        let s = sample(11, |_| 0.0);
        let f = feature_layer(&s, &BasisSystem::cubic_unit(6).unwrap()).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_signal_features_sum_to_domain_length() {
        let s = FunctionalSample::new(vec![0.1, 0.2, 0.45, 0.9], vec![1.0; 4], None).unwrap();
        let f = feature_layer(&s, &BasisSystem::cubic_unit(6).unwrap()).unwrap();
        assert!((f.iter().sum::<f64>() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_model_reconstructs_zero() {
        let model = FaeModel::zeros(cfg(vec![3], Activation::Identity)).unwrap();
        let out = model.forward(&sample(21, |t| t * t)).unwrap();
        assert!(out.coefficients.iter().all(|&b| b == 0.0));
        assert!(out.reconstruction.iter().all(|&x| x == 0.0));
        assert_eq!(out.representation, vec![0.0; 3]);
        assert_eq!(model.encode(&sample(5, |t| t)).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn representation_layer_selection() {
        assert_eq!(cfg(vec![8, 3, 8], Activation::Sigmoid).representation_layer().unwrap(), 1);
        assert!(cfg(vec![8, 3], Activation::Sigmoid).validate().is_err());
        let mut c = cfg(vec![8, 3], Activation::Sigmoid);
        c.representation_index = Some(1);
        assert_eq!(c.representation_dim().unwrap(), 3);
        c.representation_index = Some(2);
        assert!(c.validate().is_err());
    }

    #[test]
    fn penalty_needs_three_output_functions() {
        let mut c = FaeConfig::new(
            BasisSystem::cubic_unit(6).unwrap(),
            BasisSystem::bspline(Domain::unit(), 2, 2).unwrap(),
            vec![2],
            Activation::Identity,
        );
        c.lambda = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.lambda = 0.0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn penalized_loss_hand_computed() {
        let s = FunctionalSample::new(vec![0.0, 1.0], vec![1.0, -1.0], None).unwrap();
        let fwd = FaeForward {
            representation: vec![],
            coefficients: vec![0.0, 0.0, 1.0],
            reconstruction: vec![0.0, 0.0],
        };
        // residuals (1, -1) give 2; λ (Δ²b)² = 2 · 1
        let loss = penalized_loss(core::slice::from_ref(&s), core::slice::from_ref(&fwd), 2.0).unwrap();
        assert!((loss - 4.0).abs() < 1e-15);
        assert!(penalized_loss(&[s], &[], 2.0).is_err());
    }

    #[test]
    fn penalty_vanishes_on_affine_coefficients() {
        let b: Vec<f64> = (0..9).map(|m| 0.7 - 1.3 * m as f64).collect();
        assert!(second_difference_penalty(&b).abs() < 1e-20);
    }

    #[test]
    fn out_of_domain_sample_is_rejected() {
        let model = FaeModel::zeros(cfg(vec![2], Activation::Identity)).unwrap();
        let s = FunctionalSample::new(vec![0.0, 1.5], vec![1.0, 1.0], None).unwrap();
        assert!(matches!(model.forward(&s), Err(Error::Domain { .. })));
        assert!(model.smooth(&sample(5, |t| t), &[1.2]).is_err());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(train(&[], &cfg(vec![2], Activation::Identity)), Err(Error::Argument(_))));
    }
}
