//! Metrics, downstream classification and replicated train/test experiments.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline_ae::{self, AeConfig, AeModel, MaskedVector};
use crate::error::{Error, Result};
use crate::fae::{self, FaeConfig, FaeModel};
use crate::fpca::{self, FpcaConfig, FpcaModel};
use crate::linalg::Matrix;
use crate::math;
use crate::sample::{union_grid, FunctionalSample};

/// Mean over samples of each sample's mean squared residual.
///
/// `predictions[i]` must align with `truth[i].values()`.
pub fn mse_p(truth: &[FunctionalSample], predictions: &[Vec<f64>]) -> Result<f64> {
    if truth.len() != predictions.len() {
        return Err(Error::arg(alloc::format!(
            "{} samples but {} predictions",
            truth.len(),
            predictions.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::arg("mse_p of an empty collection"));
    }
    let mut total = 0.0;
    for (i, (s, p)) in truth.iter().zip(predictions).enumerate() {
        if s.len() != p.len() {
            return Err(Error::arg(alloc::format!(
                "prediction {i} has {} values for {} observations",
                p.len(),
                s.len()
            )));
        }
        let sse: f64 = s.values().iter().zip(p).map(|(x, y)| (x - y) * (x - y)).sum();
        total += sse / s.len() as f64;
    }
    Ok(total / truth.len() as f64)
}

fn default_l2() -> f64 {
    1e-4
}

fn default_lr() -> f64 {
    0.5
}

fn default_max_iter() -> usize {
    3000
}

fn default_tol() -> f64 {
    1e-9
}

/// Full-batch gradient descent on the L2-regularized cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Stops once the gradient max-norm falls below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: default_l2(),
            learning_rate: default_lr(),
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

/// Multinomial logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    classes: Vec<u32>,
    center: Vec<f64>,
    scale: Vec<f64>,
    /// `C × d`.
    weights: Matrix,
    bias: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl LogisticRegression {
    pub fn fit(reps: &Matrix, labels: &[u32], config: &LogRegConfig) -> Result<Self> {
        let (n, d) = (reps.rows(), reps.cols());
        if n != labels.len() {
            return Err(Error::arg("representation rows and labels differ in count"));
        }
        if !reps.is_finite() {
            return Err(Error::arg("representations contain non-finite values"));
        }
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::DegenerateFit("training labels contain fewer than two classes".into()));
        }
        let c = classes.len();
        let target: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label collected above"))
            .collect();

        let center: Vec<f64> = (0..d).map(|k| math::mean(&reps.column(k))).collect();
        let scale: Vec<f64> = (0..d)
            .map(|k| {
                let sd = math::sample_sd(&reps.column(k));
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        let x = Matrix::from_fn(n, d, |i, k| (reps[(i, k)] - center[k]) / scale[k]);

        let mut w = Matrix::zeros(c, d);
        let mut b = vec![0.0; c];
        let mut gw = Matrix::zeros(c, d);
        let mut gb = vec![0.0; c];
        let mut p = vec![0.0; c];
        let inv_n = 1.0 / n as f64;
        for _ in 0..config.max_iter {
            gw.as_mut_slice().fill(0.0);
            gb.fill(0.0);
            for i in 0..n {
                let xi = x.row(i);
                for (cls, pc) in p.iter_mut().enumerate() {
                    *pc = b[cls] + crate::linalg::dot(w.row(cls), xi);
                }
                softmax_in_place(&mut p);
                p[target[i]] -= 1.0;
                for (cls, &r) in p.iter().enumerate() {
                    gb[cls] += r * inv_n;
                    for (g, &xv) in gw.row_mut(cls).iter_mut().zip(xi) {
                        *g += r * xv * inv_n;
                    }
                }
            }
            for (g, &wv) in gw.as_mut_slice().iter_mut().zip(w.as_slice()) {
                *g += config.l2 * wv;
            }
            let gmax = gw.as_slice().iter().chain(&gb).fold(0.0f64, |a, v| a.max(v.abs()));
            if !gmax.is_finite() {
                return Err(Error::Numerical("logistic regression gradient is not finite".into()));
            }
            if gmax < config.tol {
                break;
            }
            for (wv, g) in w.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *wv -= config.learning_rate * g;
            }
            for (bv, g) in b.iter_mut().zip(&gb) {
                *bv -= config.learning_rate * g;
            }
        }
        Ok(LogisticRegression {
            classes,
            center,
            scale,
            weights: w,
            bias: b,
        })
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn probabilities(&self, rep: &[f64]) -> Result<Vec<f64>> {
        if rep.len() != self.center.len() {
            return Err(Error::arg("representation has the wrong dimension"));
        }
        let x: Vec<f64> = rep
            .iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut z: Vec<f64> = (0..self.classes.len())
            .map(|c| self.bias[c] + crate::linalg::dot(self.weights.row(c), &x))
            .collect();
        softmax_in_place(&mut z);
        Ok(z)
    }

    pub fn predict(&self, rep: &[f64]) -> Result<u32> {
        let p = self.probabilities(rep)?;
        let best = p
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        Ok(self.classes[best.0])
    }

    /// Fraction of rows whose predicted class equals the label.
    pub fn accuracy(&self, reps: &Matrix, labels: &[u32]) -> Result<f64> {
        if reps.rows() != labels.len() || labels.is_empty() {
            return Err(Error::arg("accuracy needs one label per non-empty representation row"));
        }
        let mut hits = 0usize;
        for (i, &l) in labels.iter().enumerate() {
            if self.predict(reps.row(i))? == l {
                hits += 1;
            }
        }
        Ok(hits as f64 / labels.len() as f64)
    }
}

pub fn logreg_train(reps: &Matrix, labels: &[u32]) -> Result<LogisticRegression> {
    LogisticRegression::fit(reps, labels, &LogRegConfig::default())
}

pub fn logreg_accuracy(model: &LogisticRegression, reps: &Matrix, labels: &[u32]) -> Result<f64> {
    model.accuracy(reps, labels)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random partition of `0..n`; both sides are returned in ascending order.
pub fn split(n: usize, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::arg("train_fraction must lie strictly between 0 and 1"));
    }
    let n_train = math::round(train_fraction * n as f64) as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::arg(alloc::format!(
            "train_fraction {train_fraction} leaves an empty side for {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Seed of replicate `r` derived from the master seed (SplitMix64 finalizer).
pub fn replicate_seed(master: u64, r: usize) -> u64 {
    let mut z = master.wrapping_add((r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Which model an experiment trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Fae(FaeConfig),
    Ae(AeConfig),
    Fpca(FpcaConfig),
}

/// A fitted model of any supported kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Fae(FaeModel),
    Ae(AeModel),
    Fpca(FpcaModel),
}

impl TrainedModel {
    /// Fits on `train`; the AE lays samples out on `grid`.
    ///
    /// Neural models train with `seed` in place of their configured seed.
    pub fn fit(spec: &ModelSpec, train: &[FunctionalSample], grid: &[f64], seed: Option<u64>) -> Result<(Self, Vec<f64>)> {
        match spec {
            ModelSpec::Fae(cfg) => {
                let mut cfg = cfg.clone();
                if let Some(s) = seed {
                    cfg.train.seed = s;
                }
                let t = fae::train(train, &cfg)?;
                Ok((TrainedModel::Fae(t.model), t.history))
            }
            ModelSpec::Ae(cfg) => {
                let mut cfg = cfg.clone();
                if let Some(s) = seed {
                    cfg.train.seed = s;
                }
                let data = train
                    .iter()
                    .map(|s| MaskedVector::from_sample(s, grid))
                    .collect::<Result<Vec<_>>>()?;
                let t = baseline_ae::train(&data, grid.to_vec(), &cfg)?;
                Ok((TrainedModel::Ae(t.model), t.history))
            }
            ModelSpec::Fpca(cfg) => Ok((TrainedModel::Fpca(fpca::train(train, cfg)?), Vec::new())),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Fae(_) => "fae",
            TrainedModel::Ae(_) => "ae",
            TrainedModel::Fpca(_) => "fpca",
        }
    }

    /// Representation used for classification.
    pub fn encode(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Fae(m) => m.encode(sample),
            TrainedModel::Ae(m) => m.encode_sample(sample),
            TrainedModel::Fpca(m) => m.scores(sample),
        }
    }

    pub fn reconstruct_at(&self, sample: &FunctionalSample, times: &[f64]) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Fae(m) => m.smooth(sample, times),
            TrainedModel::Ae(m) => m.reconstruct_at(sample, times),
            TrainedModel::Fpca(m) => {
                let scores = m.scores(sample)?;
                m.reconstruct(&scores, times)
            }
        }
    }

    /// Reconstruction at the sample's own observation times.
    pub fn predict(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        self.reconstruct_at(sample, sample.times())
    }

    pub fn encode_all(&self, samples: &[FunctionalSample]) -> Result<Matrix> {
        let rows = samples.iter().map(|s| self.encode(s)).collect::<Result<Vec<_>>>()?;
        let d = rows.first().map_or(0, Vec::len);
        Ok(Matrix::from_fn(rows.len(), d, |i, k| rows[i][k]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub mse_p: f64,
    /// Absent when the data carry no labels.
    pub p_classification: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        Stat {
            mean: math::mean(xs),
            sd: math::sample_sd(xs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mse_p: Stat,
    pub p_classification: Option<Stat>,
}

impl Summary {
    pub fn of(results: &[ReplicateResult]) -> Self {
        let mse: Vec<f64> = results.iter().map(|r| r.mse_p).collect();
        let acc: Option<Vec<f64>> = results.iter().map(|r| r.p_classification).collect();
        Summary {
            mse_p: Stat::of(&mse),
            p_classification: acc.filter(|a| !a.is_empty()).map(|a| Stat::of(&a)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub model: ModelSpec,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub replicates: Vec<ReplicateResult>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn new(model: ModelSpec, train_fraction: f64, master_seed: u64, mut replicates: Vec<ReplicateResult>) -> Self {
        replicates.sort_by_key(|r| r.replicate);
        let summary = Summary::of(&replicates);
        ExperimentReport {
            model,
            train_fraction,
            master_seed,
            replicates,
            summary,
        }
    }
}

/// Everything produced by one split → train → encode → score pass.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub result: ReplicateResult,
    pub model: TrainedModel,
    pub split: Split,
    pub history: Vec<f64>,
}

/// Runs replicate `r` of an experiment whose master seed is `master_seed`.
///
/// The replicate seed drives both the split and neural-network training.
pub fn run_replicate(
    samples: &[FunctionalSample],
    spec: &ModelSpec,
    train_fraction: f64,
    master_seed: u64,
    r: usize,
) -> Result<ReplicateOutcome> {
    let seed = replicate_seed(master_seed, r);
    let split = split(samples.len(), train_fraction, seed)?;
    let grid = union_grid(samples);
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let (train, test) = (pick(&split.train), pick(&split.test));
    let (model, history) = TrainedModel::fit(spec, &train, &grid, Some(seed))?;

    let predictions = test.iter().map(|s| model.predict(s)).collect::<Result<Vec<_>>>()?;
    let mse = mse_p(&test, &predictions)?;

    let labels = |set: &[FunctionalSample]| set.iter().map(FunctionalSample::label).collect::<Option<Vec<u32>>>();
    let p_classification = match (labels(&train), labels(&test)) {
        (Some(ytr), Some(yte)) => {
            let clf = logreg_train(&model.encode_all(&train)?, &ytr)?;
            Some(clf.accuracy(&model.encode_all(&test)?, &yte)?)
        }
        _ => None,
    };
    Ok(ReplicateOutcome {
        result: ReplicateResult {
            replicate: r,
            seed,
            mse_p: mse,
            p_classification,
        },
        model,
        split,
        history,
    })
}

/// Sequential replicated experiment.
pub fn run_experiment(
    samples: &[FunctionalSample],
    spec: &ModelSpec,
    train_fraction: f64,
    master_seed: u64,
    replicates: usize,
) -> Result<ExperimentReport> {
    let results = (0..replicates)
        .map(|r| run_replicate(samples, spec, train_fraction, master_seed, r).map(|o| o.result))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(spec.clone(), train_fraction, master_seed, results))
}
