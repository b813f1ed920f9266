//! Minimal dense-network machinery shared by every trainable model.
//!
//! A [`Network`] is a chain of [`DenseLayer`]s. The forward pass can record
//! each layer's input, pre-activation and output on a [`GradientTape`];
//! [`Network::backward`] replays the tape in reverse and accumulates exact
//! parameter gradients into [`NetworkGrads`].

mod optim;
mod train;

pub use optim::{Optimizer, OptimizerConfig};
pub use train::{batch_loss_and_gradient, train_network, BatchObjective, TrainConfig};

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Sigmoid,
    Softplus,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => math::sigmoid(z),
            Activation::Softplus => math::softplus(z),
        }
    }

    /// `g'(z)` given the pre-activation `z` and output `a = g(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Softplus => math::sigmoid(z),
        }
    }
}

/// `g(W x + b)` with an optional bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`.
    pub weight: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize, bias: bool, activation: Activation) -> Self {
        DenseLayer {
            weight: Matrix::zeros(output, input),
            bias: bias.then(|| vec![0.0; output]),
            activation,
        }
    }

    /// Weights drawn from `N(0, sd)`; biases start at zero.
    pub fn random<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        bias: bool,
        activation: Activation,
        sd: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = DenseLayer::zeros(input, output, bias, activation);
        if sd > 0.0 {
            let normal = Normal::new(0.0, sd).map_err(|_| Error::config("invalid init sd"))?;
            for w in layer.weight.as_mut_slice() {
                *w = normal.sample(rng);
            }
        } else if sd < 0.0 || sd.is_nan() {
            return Err(Error::config("init sd must be nonnegative"));
        }
        Ok(layer)
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn num_params(&self) -> usize {
        self.weight.as_slice().len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    fn pre_activation_into(&self, input: &[f64], z: &mut Vec<f64>) {
        z.clear();
        z.extend((0..self.output_dim()).map(|r| crate::linalg::dot(self.weight.row(r), input)));
        if let Some(b) = &self.bias {
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::arg(alloc::format!(
                "layer expects input of length {}, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut z = Vec::with_capacity(self.output_dim());
        self.pre_activation_into(input, &mut z);
        for zi in &mut z {
            *zi = self.activation.apply(*zi);
        }
        Ok(z)
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.as_ref().is_none_or(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Per-layer record of a forward pass.
#[derive(Debug, Clone, Default)]
struct LayerRecord {
    input: Vec<f64>,
    pre: Vec<f64>,
    output: Vec<f64>,
}

/// Ordered record of the layer computations of one forward pass.
///
/// Buffers are reused across passes, so a tape can be kept per worker.
#[derive(Debug, Clone, Default)]
pub struct GradientTape {
    records: Vec<LayerRecord>,
    len: usize,
}

impl GradientTape {
    pub fn new() -> Self {
        GradientTape::default()
    }

    /// Forget the recorded pass (buffers are kept).
    pub fn reset(&mut self) {
        self.len = 0;
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Output of recorded layer `i`.
    pub fn layer_output(&self, i: usize) -> Option<&[f64]> {
        (i < self.len).then(|| self.records[i].output.as_slice())
    }

    /// Output of the final recorded layer.
    pub fn output(&self) -> Option<&[f64]> {
        self.len.checked_sub(1).and_then(|i| self.layer_output(i))
    }

    fn push(&mut self) -> &mut LayerRecord {
        if self.len == self.records.len() {
            self.records.push(LayerRecord::default());
        }
        self.len += 1;
        &mut self.records[self.len - 1]
    }
}

/// Gradient buffers aligned 1:1 with a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<LayerGrads>,
}

impl NetworkGrads {
    pub fn zeros_like(net: &Network) -> Self {
        NetworkGrads {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weight: vec![0.0; l.weight.as_slice().len()],
                    bias: l.bias.as_ref().map(|b| vec![0.0; b.len()]),
                })
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weight.fill(0.0);
            if let Some(b) = &mut l.bias {
                b.fill(0.0);
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|g| *g *= s);
            if let Some(b) = &mut l.bias {
                b.iter_mut().for_each(|g| *g *= s);
            }
        }
    }

    /// Slices in the same order as [`Network::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.weight.as_slice());
            if let Some(b) = &l.bias {
                out.push(b.as_slice());
            }
        }
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|g| g.is_finite()))
    }
}

/// Feed-forward chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::config(alloc::format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    w[0].output_dim(),
                    i + 1,
                    w[1].input_dim()
                )));
            }
        }
        Ok(Network { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    /// Output of layer `upto` (inclusive) without recording.
    pub fn forward_upto(&self, input: &[f64], upto: usize) -> Result<Vec<f64>> {
        if upto >= self.layers.len() {
            return Err(Error::arg("layer index out of range"));
        }
        let mut x = input.to_vec();
        for (i, layer) in self.layers[..=upto].iter().enumerate() {
            x = layer.forward(&x)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: i });
            }
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_upto(input, self.layers.len() - 1)
    }

    /// Forward pass that records every layer on `tape`; returns the output.
    pub fn forward_tape<'t>(&self, input: &[f64], tape: &'t mut GradientTape) -> Result<&'t [f64]> {
        if input.len() != self.input_dim() {
            return Err(Error::arg(alloc::format!(
                "network expects input of length {}, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        tape.reset();
        for (i, layer) in self.layers.iter().enumerate() {
            let prev_output = if i == 0 {
                None
            } else {
                Some(core::mem::take(&mut tape.records[i - 1].output))
            };
            let rec = tape.push();
            rec.input.clear();
            match &prev_output {
                None => rec.input.extend_from_slice(input),
                Some(prev) => rec.input.extend_from_slice(prev),
            }
            layer.pre_activation_into(&rec.input, &mut rec.pre);
            rec.output.clear();
            let act = layer.activation;
            rec.output.extend(rec.pre.iter().map(|&z| act.apply(z)));
            if let Some(prev) = prev_output {
                tape.records[i - 1].output = prev;
            }
            if tape.records[i].output.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: i });
            }
        }
        Ok(tape.records[self.layers.len() - 1].output.as_slice())
    }

    /// Reverse pass over a recorded forward pass.
    ///
    /// `output_grad` is `∂L/∂y` for the network output `y`; parameter
    /// gradients are *added* to `grads`.
    pub fn backward(&self, tape: &GradientTape, output_grad: &[f64], grads: &mut NetworkGrads) -> Result<()> {
        if tape.len != self.layers.len() {
            return Err(Error::State("backward called without a matching forward pass".into()));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::arg("output gradient has the wrong length"));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::arg("gradient buffers do not match the network"));
        }
        let mut upstream = output_grad.to_vec();
        let mut delta = Vec::new();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let rec = &tape.records[i];
            delta.clear();
            delta.extend(
                upstream
                    .iter()
                    .zip(rec.pre.iter().zip(&rec.output))
                    .map(|(&u, (&z, &a))| u * layer.activation.derivative(z, a)),
            );
            let g = &mut grads.layers[i];
            let n_in = layer.input_dim();
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut g.weight[r * n_in..(r + 1) * n_in];
                for (gw, &x) in row.iter_mut().zip(&rec.input) {
                    *gw += d * x;
                }
            }
            if let Some(gb) = &mut g.bias {
                for (b, &d) in gb.iter_mut().zip(&delta) {
                    *b += d;
                }
            }
            if i > 0 {
                upstream = layer.weight.tr_matvec(&delta);
            }
        }
        Ok(())
    }

    /// Mutable parameter slices: for each layer its weights, then its bias.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            if let Some(b) = &mut l.bias {
                out.push(b.as_mut_slice());
            }
        }
        out
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            if let Some(b) = &l.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = DenseLayer {
            weight: Matrix::identity(2),
            bias: Some(vec![0.0, 0.0]),
            activation: Activation::Identity,
        };
        assert_eq!(layer.forward(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn zero_sigmoid_layer_is_one_half() {
        let layer = DenseLayer::zeros(4, 3, true, Activation::Sigmoid);
        assert_eq!(layer.forward(&[1.0, -2.0, 7.0, 0.3]).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let layer = DenseLayer::zeros(3, 2, false, Activation::Identity);
        assert!(matches!(layer.forward(&[1.0]), Err(Error::Argument(_))));
        let net = Network::new(vec![layer]).unwrap();
        let mut tape = GradientTape::new();
        assert!(net.forward_tape(&[1.0, 2.0], &mut tape).is_err());
        let bad = Network::new(vec![
            DenseLayer::zeros(3, 2, false, Activation::Identity),
            DenseLayer::zeros(3, 2, false, Activation::Identity),
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn backward_without_forward_is_a_state_error() {
        let net = Network::new(vec![DenseLayer::zeros(2, 2, true, Activation::Sigmoid)]).unwrap();
        let tape = GradientTape::new();
        let mut g = NetworkGrads::zeros_like(&net);
        assert!(matches!(net.backward(&tape, &[1.0, 1.0], &mut g), Err(Error::State(_))));
    }

    #[test]
    fn linear_least_squares_gradient() {
        // L = ½‖Wx − y‖² has ∂L/∂W = (Wx − y) xᵀ
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = DenseLayer::random(3, 2, false, Activation::Identity, 1.0, &mut rng).unwrap();
        let net = Network::new(vec![layer.clone()]).unwrap();
        let x = [0.3, -1.2, 2.0];
        let y = [0.5, -0.25];
        let mut tape = GradientTape::new();
        let out = net.forward_tape(&x, &mut tape).unwrap().to_vec();
        let resid: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
        let mut g = NetworkGrads::zeros_like(&net);
        net.backward(&tape, &resid, &mut g).unwrap();
        for (r, res) in resid.iter().enumerate() {
            for (c, xc) in x.iter().enumerate() {
                assert!((g.layers[0].weight[r * 3 + c] - res * xc).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn weights_reading_a_zero_input_get_exactly_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::new(vec![
            DenseLayer::random(3, 4, true, Activation::Sigmoid, 1.0, &mut rng).unwrap(),
            DenseLayer::random(4, 2, true, Activation::Softplus, 1.0, &mut rng).unwrap(),
        ])
        .unwrap();
        let mut tape = GradientTape::new();
        net.forward_tape(&[0.7, 0.0, -0.4], &mut tape).unwrap();
        let mut g = NetworkGrads::zeros_like(&net);
        net.backward(&tape, &[1.0, -2.0], &mut g).unwrap();
        for r in 0..4 {
            assert_eq!(g.layers[0].weight[r * 3 + 1], 0.0);
            assert_ne!(g.layers[0].weight[r * 3], 0.0);
        }
    }

    #[test]
    fn tape_reuse_matches_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::new(vec![
            DenseLayer::random(4, 3, true, Activation::Softplus, 0.5, &mut rng).unwrap(),
            DenseLayer::random(3, 4, false, Activation::Identity, 0.5, &mut rng).unwrap(),
        ])
        .unwrap();
        let mut tape = GradientTape::new();
        for k in 0..3 {
            let x = [k as f64, 1.0, -0.5, 0.25 * k as f64];
            let recorded = net.forward_tape(&x, &mut tape).unwrap().to_vec();
            assert_eq!(recorded, net.forward(&x).unwrap());
            assert_eq!(tape.layer_output(0).unwrap(), net.forward_upto(&x, 0).unwrap().as_slice());
        }
    }
}
