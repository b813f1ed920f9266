//! Synthetic functional datasets.
//!
//! Each curve comes from a latent vector `z` drawn from a Gaussian mixture.
//! A frozen random network maps `z` to basis coefficients `b`, and the curve
//! `X(t) = Σ b_m ψ_m(t)` is evaluated on the grid, optionally with Gaussian
//! noise and with interior points removed at random.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSystem, Domain};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, Matrix};
use crate::math;
use crate::nncore::{Activation, DenseLayer, Network};
use crate::sample::FunctionalSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum GeneratorMap {
    /// `b = W z`, no hidden layer and no bias.
    Linear,
    /// `b = W₂ σ(W₁ z + c)`.
    OneHiddenSigmoid { width: usize },
}

/// Measurement noise added to every rendered value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Noise {
    /// Fixed standard deviation.
    Absolute { sd: f64 },
    /// Standard deviation as a fraction of the pooled SD of the noiseless values.
    SignalFraction { fraction: f64 },
}

impl Default for Noise {
    fn default() -> Self {
        Noise::Absolute { sd: 0.0 }
    }
}

/// Explicit mixture; when absent the defaults below are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Full `d × d` covariance per component.
    pub covariances: Vec<Matrix>,
}

fn default_separation() -> f64 {
    3.0
}

fn default_component_variance() -> f64 {
    0.5
}

fn default_map_gain() -> f64 {
    1.0
}

fn default_map_hidden_gain() -> f64 {
    4.0
}

/// Mean separation used by the scenario presets.
pub const PRESET_SEPARATION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_samples: usize,
    pub latent_dim: usize,
    pub n_components: usize,
    /// Overrides the default equal-weight lattice mixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Mixture>,
    /// Minimum pairwise distance between default component means.
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Default components use `component_variance · I`.
    #[serde(default = "default_component_variance")]
    pub component_variance: f64,
    pub map: GeneratorMap,
    /// Scales the output weights of the generator network.
    #[serde(default = "default_map_gain")]
    pub map_gain: f64,
    /// Scales the hidden-layer weights of a nonlinear generator; larger
    /// values push the sigmoid units further into saturation.
    #[serde(default = "default_map_hidden_gain")]
    pub map_hidden_gain: f64,
    /// Seeds the mixture means and the generator network weights.
    pub map_seed: u64,
    pub gen_basis: BasisSystem,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub irregular_removals: usize,
    /// Seeds latent draws, noise and point removal.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    S1_1,
    S1_2,
    S2_1,
    S2_2,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::S1_1, Preset::S1_2, Preset::S2_1, Preset::S2_2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::S1_1 => "S1_1",
            Preset::S1_2 => "S1_2",
            Preset::S2_1 => "S2_1",
            Preset::S2_2 => "S2_2",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| *c != '_' && *c != '.').collect::<String>().to_ascii_uppercase();
        match norm.as_str() {
            "S11" => Ok(Preset::S1_1),
            "S12" => Ok(Preset::S1_2),
            "S21" => Ok(Preset::S2_1),
            "S22" => Ok(Preset::S2_2),
            _ => Err(Error::arg(alloc::format!(
                "unknown preset '{s}' (expected one of S1_1, S1_2, S2_1, S2_2)"
            ))),
        }
    }
}

/// Published scenario settings.
///
/// Unpublished details are filled in so that FPCA accuracies land near the
/// published ones: lattice means at separation [`PRESET_SEPARATION`],
/// covariance `0.5 I`, strongly saturated generator units and noise at 5% of
/// the signal SD.
pub fn preset(which: Preset) -> ScenarioConfig {
    let unit = Domain::unit();
    let (n, j, m, map, removals) = match which {
        Preset::S1_1 => (6000, 21, 8, GeneratorMap::Linear, 0),
        Preset::S1_2 | Preset::S2_1 => (3000, 51, 10, GeneratorMap::OneHiddenSigmoid { width: 20 }, 0),
        Preset::S2_2 => (3000, 51, 10, GeneratorMap::OneHiddenSigmoid { width: 20 }, 25),
    };
    ScenarioConfig {
        n_samples: n,
        latent_dim: 5,
        n_components: 3,
        mixture: None,
        separation: PRESET_SEPARATION,
        component_variance: default_component_variance(),
        map,
        map_gain: default_map_gain(),
        map_hidden_gain: default_map_hidden_gain(),
        map_seed: 2022,
        gen_basis: BasisSystem::bspline(unit, m, 4).expect("valid preset basis"),
        grid: unit.uniform_grid(j),
        noise: Noise::SignalFraction { fraction: 0.05 },
        irregular_removals: removals,
        seed: 1,
    }
}

pub fn preset_by_name(name: &str) -> Result<ScenarioConfig> {
    Ok(preset(name.parse()?))
}

/// A generated dataset together with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedData {
    pub samples: Vec<FunctionalSample>,
    pub labels: Vec<u32>,
    /// `N × d`.
    pub latents: Matrix,
    /// `N × M`.
    pub coeffs: Matrix,
    pub mixture: Mixture,
    pub map_network: Network,
    /// Noise standard deviation actually applied.
    pub noise_sd: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.latent_dim == 0 || self.n_components == 0 {
            return Err(Error::config("n_samples, latent_dim and n_components must be positive"));
        }
        let j = self.grid.len();
        if j < 2 || self.grid.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater)) {
            return Err(Error::config("grid must have at least two strictly increasing points"));
        }
        for &t in &self.grid {
            self.gen_basis.domain().check(t)?;
        }
        if self.irregular_removals > j - 2 {
            return Err(Error::config(alloc::format!(
                "cannot remove {} of the {} interior grid points",
                self.irregular_removals,
                j - 2
            )));
        }
        let noise_ok = match self.noise {
            Noise::Absolute { sd } => sd >= 0.0 && sd.is_finite(),
            Noise::SignalFraction { fraction } => fraction >= 0.0 && fraction.is_finite(),
        };
        if !noise_ok {
            return Err(Error::config("noise level must be finite and nonnegative"));
        }
        if let GeneratorMap::OneHiddenSigmoid { width: 0 } = self.map {
            return Err(Error::config("generator hidden width must be positive"));
        }
        if !(self.map_gain.is_finite() && self.map_hidden_gain.is_finite() && self.separation >= 0.0 && self.component_variance >= 0.0) {
            return Err(Error::config("invalid mixture or map scale"));
        }
        if let Some(mix) = &self.mixture {
            self.check_mixture(mix)?;
        }
        Ok(())
    }

    fn check_mixture(&self, mix: &Mixture) -> Result<()> {
        let (k, d) = (self.n_components, self.latent_dim);
        if mix.weights.len() != k || mix.means.len() != k || mix.covariances.len() != k {
            return Err(Error::config("mixture must list one weight, mean and covariance per component"));
        }
        if mix.weights.iter().any(|w| w.is_nan() || *w < 0.0) || mix.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("mixture weights must be nonnegative with positive sum"));
        }
        if mix.means.iter().any(|m| m.len() != d) || mix.covariances.iter().any(|c| c.rows() != d || c.cols() != d) {
            return Err(Error::config("mixture dimensions do not match latent_dim"));
        }
        Ok(())
    }

    /// The mixture used for generation: explicit, or the lattice default.
    pub fn resolve_mixture(&self) -> Result<Mixture> {
        if let Some(mix) = &self.mixture {
            self.check_mixture(mix)?;
            return Ok(mix.clone());
        }
        let (k, d) = (self.n_components, self.latent_dim);
        let lattice = 3u32.checked_pow(d as u32).unwrap_or(u32::MAX);
        if k as u64 > u64::from(lattice) {
            return Err(Error::config("more components than distinct lattice points"));
        }
        // Distinct points of {-1, 0, 1}^d are at least 1 apart.
        let mut rng = ChaCha8Rng::seed_from_u64(self.map_seed ^ 0x4D49_5854);
        let mut chosen: Vec<u32> = Vec::with_capacity(k);
        while chosen.len() < k {
            let code = rng.random_range(0..lattice);
            if !chosen.contains(&code) {
                chosen.push(code);
            }
        }
        let means = chosen
            .iter()
            .map(|&code| {
                let mut c = code;
                (0..d)
                    .map(|_| {
                        let digit = (c % 3) as f64 - 1.0;
                        c /= 3;
                        digit * self.separation
                    })
                    .collect()
            })
            .collect();
        let mut cov = Matrix::identity(d);
        for v in cov.as_mut_slice() {
            *v *= self.component_variance;
        }
        Ok(Mixture {
            weights: vec![1.0 / k as f64; k],
            means,
            covariances: vec![cov; k],
        })
    }

    /// The frozen generator network for this configuration.
    pub fn map_network(&self) -> Result<Network> {
        let (d, m) = (self.latent_dim, self.gen_basis.num_basis());
        let mut rng = ChaCha8Rng::seed_from_u64(self.map_seed);
        let layers = match self.map {
            GeneratorMap::Linear => {
                let sd = self.map_gain / math::sqrt(d as f64);
                vec![DenseLayer::random(d, m, false, Activation::Identity, sd, &mut rng)?]
            }
            GeneratorMap::OneHiddenSigmoid { width } => {
                let mut hidden = DenseLayer::random(d, width, true, Activation::Sigmoid, self.map_hidden_gain / math::sqrt(d as f64), &mut rng)?;
                if let Some(b) = hidden.bias.as_mut() {
                    for v in b.iter_mut() {
                        *v = rng.sample::<f64, _>(StandardNormal);
                    }
                }
                let sd = 2.0 * self.map_gain / math::sqrt(width as f64);
                let out = DenseLayer::random(width, m, false, Activation::Identity, sd, &mut rng)?;
                vec![hidden, out]
            }
        };
        Network::new(layers)
    }
}

fn pooled_sd(rows: &[Vec<f64>]) -> f64 {
    let n: usize = rows.iter().map(Vec::len).sum();
    if n < 2 {
        return 0.0;
    }
    let mean = rows.iter().flatten().sum::<f64>() / n as f64;
    let ss: f64 = rows.iter().flatten().map(|v| (v - mean) * (v - mean)).sum();
    math::sqrt(ss / (n - 1) as f64)
}

/// Draws a dataset; the same configuration always yields the same bits.
pub fn generate(config: &ScenarioConfig) -> Result<SimulatedData> {
    config.validate()?;
    let (n, d) = (config.n_samples, config.latent_dim);
    let mixture = config.resolve_mixture()?;
    let factors = mixture
        .covariances
        .iter()
        .map(|c| cholesky_psd(c).ok_or_else(|| Error::config("component covariance is not positive semi-definite")))
        .collect::<Result<Vec<_>>>()?;
    let network = config.map_network()?;
    let design = config.gen_basis.design_matrix(&config.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let total: f64 = mixture.weights.iter().sum();
    let mut labels = Vec::with_capacity(n);
    let mut latents = Matrix::zeros(n, d);
    let mut coeffs = Matrix::zeros(n, config.gen_basis.num_basis());
    let mut clean = Vec::with_capacity(n);
    let mut eps = vec![0.0; d];
    for i in 0..n {
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut k = mixture.weights.len() - 1;
        for (c, w) in mixture.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = c;
                break;
            }
        }
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let z = latents.row_mut(i);
        let l = &factors[k];
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = mixture.means[k][r] + (0..=r).map(|c| l[(r, c)] * eps[c]).sum::<f64>();
        }
        let b = network.forward(latents.row(i))?;
        coeffs.row_mut(i).copy_from_slice(&b);
        clean.push(design.matvec(&b));
        labels.push(k as u32);
    }

    let noise_sd = match config.noise {
        Noise::Absolute { sd } => sd,
        Noise::SignalFraction { fraction } => fraction * pooled_sd(&clean),
    };
    let normal = Normal::new(0.0, noise_sd).map_err(|_| Error::config("invalid noise level"))?;
    let j = config.grid.len();
    let mut samples = Vec::with_capacity(n);
    for (values, &label) in clean.into_iter().zip(&labels) {
        let mut values = values;
        if noise_sd > 0.0 {
            for v in values.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        let (times, values) = if config.irregular_removals > 0 {
            let mut keep = vec![true; j];
            let mut interior: Vec<usize> = (1..j - 1).collect();
            let (dropped, _) = interior.partial_shuffle(&mut rng, config.irregular_removals);
            for &r in dropped.iter() {
                keep[r] = false;
            }
            let times = config.grid.iter().zip(&keep).filter(|(_, k)| **k).map(|(t, _)| *t).collect();
            let values = values.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| *v).collect();
            (times, values)
        } else {
            (config.grid.clone(), values)
        };
        samples.push(FunctionalSample::new(times, values, Some(label))?);
    }

    Ok(SimulatedData {
        samples,
        labels,
        latents,
        coeffs,
        mixture,
        map_network: network,
        noise_sd,
    })
}
