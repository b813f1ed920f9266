//! End-to-end acceptance gate. Each criterion prints one PASS/FAIL line with the
//! measured quantities; the process exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{midpoint_gram, uniform};
use fae_core::baseline_ae::AeConfig;
use fae_core::basis::{BasisKind, BasisSystem, Domain};
use fae_core::eval::{logreg_train, run_experiment, run_replicate, ModelSpec, ReplicateOutcome, TrainedModel};
use fae_core::fae::{second_difference_penalty, FaeConfig, FaeModel};
use fae_core::fpca::{self, FpcaConfig};
use fae_core::linalg::Matrix;
use fae_core::nncore::{Activation, OptimizerConfig, TrainConfig};
use fae_core::quadrature::trapezoid_weights;
use fae_core::simgen::{generate, preset, Noise, Preset};
use fae_core::{Error, FunctionalSample};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const ACTIVATIONS: [Activation; 3] = [Activation::Identity, Activation::Sigmoid, Activation::Softplus];

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Verdict);

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn adam(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 64,
        optimizer: OptimizerConfig::adam(lr),
        seed: 0,
    }
}

fn fae_spec(basis: &BasisSystem, hidden: Vec<usize>, act: Activation, epochs: usize) -> FaeConfig {
    let mut c = FaeConfig::new(basis.clone(), basis.clone(), hidden, act);
    c.train = adam(epochs, 0.01);
    c
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn gradient_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for cfg_id in 0..100u64 {
        let m_in = rng.random_range(4..=10);
        let m_out = rng.random_range(4..=10);
        let depth = rng.random_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=6)).collect();
        let act = ACTIVATIONS[(cfg_id % 3) as usize];
        let input = if rng.random_bool(0.25) {
            BasisSystem::fourier(Domain::unit(), m_in).unwrap()
        } else {
            BasisSystem::cubic_unit(m_in).unwrap()
        };
        let mut cfg = FaeConfig::new(input, BasisSystem::cubic_unit(m_out).unwrap(), hidden, act);
        if depth == 2 {
            cfg.representation_index = Some(0);
        }
        cfg.lambda = if cfg_id % 2 == 0 { 0.0 } else { 5.0 };
        cfg.init_sd = 0.8;
        cfg.train.seed = cfg_id;
        let mut model = FaeModel::init(cfg).unwrap();
        for slice in model.network_mut().params_mut() {
            for v in slice.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let samples: Vec<FunctionalSample> = (0..3)
            .map(|_| {
                let j = rng.random_range(5..=12);
                let mut t: Vec<f64> = (0..j - 2).map(|_| rng.random_range(0.01..0.99)).collect();
                t.push(0.0);
                t.push(1.0);
                t.sort_by(f64::total_cmp);
                t.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                let v = t.iter().map(|_| rng.sample(StandardNormal)).collect();
                FunctionalSample::new(t, v, None).unwrap()
            })
            .collect();
        let analytic = model.loss_and_gradient(&samples).unwrap().1.flatten();
        params += analytic.len();
        let h = 1e-4;
        let numeric: Vec<f64> = (0..analytic.len())
            .map(|p| {
                let at = |delta: f64| {
                    let mut m = model.clone();
                    let mut i = 0;
                    for slice in m.network_mut().params_mut() {
                        for v in slice.iter_mut() {
                            if i == p {
                                *v += delta;
                            }
                            i += 1;
                        }
                    }
                    m.loss_and_gradient(&samples).unwrap().0
                };
                (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
            })
            .collect();
        worst = worst.max(common::max_rel_err(&analytic, &numeric, 1e-6));
    }
    verdict(worst <= 1e-5, format!("100 configurations, {params} parameters, max relative error {worst:.2e} (limit 1e-5)"))
}

fn basis_quadrature_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut pou: f64 = 0.0;
    for _ in 0..1000 {
        let order = rng.random_range(1..=5);
        let m = rng.random_range(order.max(2)..=15);
        let basis = BasisSystem::bspline(Domain::unit(), m, order).unwrap();
        let v = basis.evaluate(rng.random_range(0.0..=1.0)).unwrap();
        pou = pou.max((v.iter().sum::<f64>() - 1.0).abs());
    }
    let mut affine: f64 = 0.0;
    for _ in 0..1000 {
        let (lo, hi) = (rng.random_range(-3.0..0.0), rng.random_range(0.5..4.0));
        let n = rng.random_range(2..40);
        let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        t.push(lo);
        t.push(hi);
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let f: Vec<f64> = t.iter().map(|x| a * x + b).collect();
        let exact = a * (hi * hi - lo * lo) / 2.0 + b * (hi - lo);
        let got = trapezoid_weights(&t).unwrap().integrate(&f).unwrap();
        affine = affine.max((got - exact).abs());
    }
    let mut gram: f64 = 0.0;
    for basis in [
        BasisSystem::cubic_unit(10).unwrap(),
        BasisSystem::bspline(Domain::new(-1.0, 2.0).unwrap(), 7, 3).unwrap(),
        BasisSystem::fourier(Domain::unit(), 5).unwrap(),
    ] {
        let g = basis.gram_matrix(10_001).unwrap();
        let oracle = midpoint_gram(&basis, 100_000);
        for (a, row) in oracle.iter().enumerate() {
            for (b, o) in row.iter().enumerate() {
                gram = gram.max((g[(a, b)] - o).abs());
            }
        }
    }
    verdict(
        pou <= 1e-12 && affine <= 1e-13 && gram <= 1e-6,
        format!("partition of unity {pou:.1e} (1e-12), affine trapezoid {affine:.1e} (1e-13), Gram vs 10x oracle {gram:.1e} (1e-6)"),
    )
}

fn fpca_correctness() -> Verdict {
    let basis = BasisSystem::cubic_unit(10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let grid = uniform(41);
    let mu: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dirs: Vec<Vec<f64>> = (0..3).map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let samples: Vec<FunctionalSample> = (0..200)
        .map(|_| {
            let mut c = mu.clone();
            for (k, d) in dirs.iter().enumerate() {
                let s = rng.sample::<f64, _>(StandardNormal) * (2.0 - 0.5 * k as f64);
                c.iter_mut().zip(d).for_each(|(cm, dm)| *cm += s * dm);
            }
            FunctionalSample::new(grid.clone(), basis.combine_many(&c, &grid).unwrap(), None).unwrap()
        })
        .collect();
    let model = fpca::train(&samples, &FpcaConfig::new(basis, 3)).unwrap();

    let cells = 200_000;
    let mids: Vec<f64> = (0..cells).map(|c| (c as f64 + 0.5) / cells as f64).collect();
    let psi: Vec<Vec<f64>> = (0..3).map(|k| model.eigenfunction(k, &mids).unwrap()).collect();
    let mut ortho: f64 = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let ip = psi[a].iter().zip(&psi[b]).map(|(x, y)| x * y).sum::<f64>() / cells as f64;
            ortho = ortho.max((ip - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }

    let scores: Vec<Vec<f64>> = samples.iter().map(|s| model.scores(s).unwrap()).collect();
    let mut var_err: f64 = 0.0;
    for k in 0..3 {
        let col: Vec<f64> = scores.iter().map(|s| s[k]).collect();
        let m = mean(col.iter().copied());
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (col.len() - 1) as f64;
        var_err = var_err.max((var - model.eigenvalues()[k]).abs() / model.eigenvalues()[k]);
    }

    let all: Vec<f64> = samples.iter().flat_map(|s| s.values().to_vec()).collect();
    let m = mean(all.iter().copied());
    let signal_var = all.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / all.len() as f64;
    let recon: Vec<Vec<f64>> = samples.iter().map(|s| model.reconstruct_sample(s).unwrap()).collect();
    let err = fae_core::eval::mse_p(&samples, &recon).unwrap() / signal_var;
    verdict(
        ortho <= 1e-6 && var_err <= 1e-8 && err < 1e-6,
        format!("orthonormality {ortho:.1e} (1e-6), score variance rel. error {var_err:.1e} (1e-8), rank-3 error/variance {err:.1e} (<1e-6)"),
    )
}

fn linear_fae_vs_fpca() -> Verdict {
    let start = Instant::now();
    let cfg = preset(Preset::S1_1);
    let data = generate(&cfg).unwrap();
    let basis = cfg.gen_basis.clone();
    let fae = run_replicate(&data.samples, &ModelSpec::Fae(fae_spec(&basis, vec![5], Activation::Identity, 100)), 0.8, 4, 0).unwrap();
    let fpca = run_replicate(&data.samples, &ModelSpec::Fpca(FpcaConfig::new(basis, 5)), 0.8, 4, 0).unwrap();
    let elapsed = start.elapsed();
    let ratio = fae.result.mse_p / fpca.result.mse_p;
    verdict(
        ratio <= 1.5 && elapsed <= Duration::from_secs(300),
        format!(
            "Identity-FAE MSE_p {:.5} vs FPCA-5 {:.5}, ratio {ratio:.3} (<=1.5), {:.1} s (<=300 s)",
            fae.result.mse_p,
            fpca.result.mse_p,
            elapsed.as_secs_f64()
        ),
    )
}

fn nonlinear_advantage() -> Verdict {
    let cfg = preset(Preset::S1_2);
    let data = generate(&cfg).unwrap();
    let basis = cfg.gen_basis.clone();
    let reps = 5;
    let hidden = vec![50, 20, 3, 20, 50];
    let fae = run_experiment(&data.samples, &ModelSpec::Fae(fae_spec(&basis, hidden, Activation::Sigmoid, 1000)), 0.8, 5, reps).unwrap();
    let fpca = run_experiment(&data.samples, &ModelSpec::Fpca(FpcaConfig::new(basis, 3)), 0.8, 5, reps).unwrap();
    let (fm, pm) = (fae.summary.mse_p.mean, fpca.summary.mse_p.mean);
    let fa = fae.summary.p_classification.unwrap().mean;
    let pa = fpca.summary.p_classification.unwrap().mean;
    let ratio = fm / pm;
    let gain = 100.0 * (fa - pa);
    verdict(
        ratio <= 0.8 && gain >= 2.0,
        format!(
            "{reps} replicates: Sigmoid-FAE MSE_p {fm:.5} vs FPCA-3 {pm:.5}, ratio {ratio:.3} (<=0.8); accuracy {:.2}% vs {:.2}%, +{gain:.2} points (>=2)",
            100.0 * fa,
            100.0 * pa
        ),
    )
}

fn irregular_robustness() -> Verdict {
    let cfg = preset(Preset::S2_2);
    let data = generate(&cfg).unwrap();
    let basis = cfg.gen_basis.clone();
    let reps = 5;
    let hidden = vec![20, 5, 20];
    let fae = run_experiment(&data.samples, &ModelSpec::Fae(fae_spec(&basis, hidden.clone(), Activation::Softplus, 2000)), 0.2, 6, reps).unwrap();
    let mut ae = AeConfig::new(hidden, Activation::Softplus);
    ae.train = adam(2000, 0.01);
    let ae = run_experiment(&data.samples, &ModelSpec::Ae(ae), 0.2, 6, reps).unwrap();
    let ratio = ae.summary.mse_p.mean / fae.summary.mse_p.mean;
    verdict(
        ratio >= 3.0,
        format!(
            "{reps} replicates, 20% training, 25 removals: Softplus-FAE MSE_p {:.5} vs masked AE {:.5}, AE/FAE {ratio:.2} (>=3)",
            fae.summary.mse_p.mean, ae.summary.mse_p.mean
        ),
    )
}

/// Largest possible jump of a B-spline curve across a step of `h`, from the
/// derivative bound `(k-1) max|Δb| / min knot span`.
fn spline_jump_bound(basis: &BasisSystem, b: &[f64], h: f64) -> f64 {
    let BasisKind::Bspline { order: k } = basis.kind() else { unreachable!() };
    let knots = basis.knots();
    let min_span = (0..b.len() - 1)
        .map(|i| knots[i + k] - knots[i + 1])
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let max_db = b.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    h * (k - 1) as f64 * max_db / min_span
}

fn smoothness() -> Verdict {
    let mut cfg = preset(Preset::S1_2);
    cfg.n_samples = 400;
    cfg.noise = Noise::SignalFraction { fraction: 0.5 };
    let data = generate(&cfg).unwrap();
    let basis = BasisSystem::cubic_unit(15).unwrap();
    let mut spec = fae_spec(&basis, vec![20, 5, 20], Activation::Softplus, 300);
    let rough = run_replicate(&data.samples, &ModelSpec::Fae(spec.clone()), 0.5, 7, 0).unwrap();
    spec.lambda = 100.0;
    let smooth = run_replicate(&data.samples, &ModelSpec::Fae(spec), 0.5, 7, 0).unwrap();
    let test: Vec<&FunctionalSample> = rough.split.test.iter().map(|&i| &data.samples[i]).collect();
    let penalty = |o: &ReplicateOutcome| {
        let TrainedModel::Fae(m) = &o.model else { unreachable!() };
        mean(test.iter().map(|s| second_difference_penalty(&m.coefficients(s).unwrap())))
    };
    let (p0, p100) = (penalty(&rough), penalty(&smooth));

    let TrainedModel::Fae(model) = &smooth.model else { unreachable!() };
    let j = cfg.grid.len();
    let fine = uniform(10 * (j - 1) + 1);
    let h = fine[1] - fine[0];
    let mut jumps_ok = true;
    let mut worst_ratio: f64 = 0.0;
    for s in &test {
        let b = model.coefficients(s).unwrap();
        let curve = model.smooth(s, &fine).unwrap();
        let bound = spline_jump_bound(&basis, &b, h);
        let jump = curve.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        jumps_ok &= jump <= bound * (1.0 + 1e-12) + 1e-15;
        worst_ratio = worst_ratio.max(jump / bound);
    }

    let mut ae = AeConfig::new(vec![20, 5, 20], Activation::Softplus);
    ae.train = adam(5, 0.01);
    let train: Vec<FunctionalSample> = rough.split.train.iter().map(|&i| data.samples[i].clone()).collect();
    let (ae_model, _) = TrainedModel::fit(&ModelSpec::Ae(ae), &train, &cfg.grid, Some(7)).unwrap();
    let rejected = matches!(ae_model.reconstruct_at(test[0], &fine), Err(Error::Unsupported(_)));

    verdict(
        p100 < p0 && jumps_ok && rejected,
        format!(
            "test penalty lambda=100 {p100:.3e} < lambda=0 {p0:.3e}; 10x-grid max jump/derivative bound {worst_ratio:.3} (<=1); AE off-grid rejected: {rejected}"
        ),
    )
}

fn classification_sanity() -> Verdict {
    let cfg = preset(Preset::S1_1);
    let data = generate(&cfg).unwrap();
    let out = run_replicate(&data.samples, &ModelSpec::Fae(fae_spec(&cfg.gen_basis, vec![5], Activation::Identity, 100)), 0.8, 8, 0).unwrap();
    let acc = out.result.p_classification.unwrap();

    let pick = |idx: &[usize]| idx.iter().map(|&i| data.samples[i].clone()).collect::<Vec<_>>();
    let (train, test) = (pick(&out.split.train), pick(&out.split.test));
    let (xtr, xte): (Matrix, Matrix) = (out.model.encode_all(&train).unwrap(), out.model.encode_all(&test).unwrap());
    let mut labels = data.labels.clone();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(800));
    let ytr: Vec<u32> = out.split.train.iter().map(|&i| labels[i]).collect();
    let yte: Vec<u32> = out.split.test.iter().map(|&i| labels[i]).collect();
    let shuffled = logreg_train(&xtr, &ytr).unwrap().accuracy(&xte, &yte).unwrap();
    verdict(
        acc > 0.8 && (shuffled - 1.0 / 3.0).abs() <= 0.05,
        format!("5-dim FAE accuracy {:.2}% (>80%); shuffled labels {:.2}% (33.3% +/- 5)", 100.0 * acc, 100.0 * shuffled),
    )
}

fn pipeline_json(master_seed: u64) -> String {
    let mut cfg = preset(Preset::S2_2);
    cfg.n_samples = 150;
    let data = generate(&cfg).unwrap();
    let basis = cfg.gen_basis.clone();
    let mut ae = AeConfig::new(vec![10, 3, 10], Activation::Sigmoid);
    ae.train = adam(40, 0.01);
    let specs = [
        ModelSpec::Fae(fae_spec(&basis, vec![10, 3, 10], Activation::Softplus, 40)),
        ModelSpec::Ae(ae),
        ModelSpec::Fpca(FpcaConfig::new(basis, 3)),
    ];
    let reports: Vec<_> = specs.iter().map(|s| run_experiment(&data.samples, s, 0.5, master_seed, 3).unwrap()).collect();
    serde_json::to_string(&(data, reports)).unwrap()
}

fn determinism() -> Verdict {
    let (a, b) = (pipeline_json(9), pipeline_json(9));
    let other = pipeline_json(10);
    verdict(
        a == b && a != other,
        format!("simulation + FAE/AE/FPCA reports over 3 replicates: rerun identical {}, different seed differs {}", a == b, a != other),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient correctness", gradient_correctness),
        ("basis and quadrature exactness", basis_quadrature_exactness),
        ("FPCA correctness", fpca_correctness),
        ("linear FAE matches FPCA", linear_fae_vs_fpca),
        ("nonlinear advantage", nonlinear_advantage),
        ("irregular-data robustness", irregular_robustness),
        ("smoothness", smoothness),
        ("classification sanity", classification_sanity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {name}: {} ({:.1} s)",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
