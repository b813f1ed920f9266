//! Implementations of the `fae` subcommands.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fae_core::baseline_ae::AeConfig;
use fae_core::basis::{BasisSystem, Domain};
use fae_core::eval::{self, ExperimentReport, ModelSpec, ReplicateOutcome, TrainedModel};
use fae_core::fae::FaeConfig;
use fae_core::fpca::FpcaConfig;
use fae_core::nncore::Activation;
use fae_core::sample::{union_grid, MeanCurve};
use fae_core::simgen::{self, ScenarioConfig};
use fae_core::FunctionalSample;
use serde::Serialize;

use crate::artifacts::{self, sibling, Invocation, ModelFile, Sidecar, SCHEMA_VERSION};
use crate::dataset::{write_curves, Dataset};
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario preset (S1_1, S1_2, S2_1, S2_2).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// Scenario configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV file, or a directory (trailing `/` or existing) that receives `<name>.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario's sample count.
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Overrides the scenario's sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Long-format CSV with columns sample_id, t, value and optionally label.
    #[arg(long)]
    pub data: PathBuf,
    /// Normalized dataset to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Subtract the pointwise mean curve of this dataset.
    #[arg(long, conflicts_with = "mean_from")]
    pub center: bool,
    /// Subtract a mean curve saved by an earlier `ingest --center` (e.g. of the training set).
    #[arg(long)]
    pub mean_from: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Fae,
    Ae,
    Fpca,
}

impl ModelKind {
    fn of(spec: &ModelSpec) -> Self {
        match spec {
            ModelSpec::Fae(_) => ModelKind::Fae,
            ModelSpec::Ae(_) => ModelKind::Ae,
            ModelSpec::Fpca(_) => ModelKind::Fpca,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModelKind::Fae => "fae",
            ModelKind::Ae => "ae",
            ModelKind::Fpca => "fpca",
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub model: ModelKind,
    #[arg(long)]
    pub data: PathBuf,
    /// Model configuration JSON; defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Serialized model output.
    #[arg(long)]
    pub out: PathBuf,
    /// FPCA components, or the representation size of a default FAE/AE.
    #[arg(long)]
    pub components: Option<usize>,
    /// Per-epoch loss CSV (defaults to `<out>.loss.csv`).
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    /// Overrides the training seed of neural models.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model files or config files; each is refit on every replicate split.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Master seed; replicate seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for replicates (results do not depend on it).
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Reconstruction grid `lo:hi:n` (defaults to the observed time points).
    #[arg(long)]
    pub eval_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluation grid `lo:hi:n` (defaults to each sample's observed times).
    #[arg(long)]
    pub grid: Option<String>,
    /// Mean curve to add back to the output (from `ingest --center`).
    #[arg(long)]
    pub mean: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    preset: Option<&'a str>,
    scenario: &'a ScenarioConfig,
    n_samples: usize,
    noise_sd: f64,
    mixture: &'a simgen::Mixture,
    map_network: &'a fae_core::nncore::Network,
    columns: [&'static str; 4],
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let (name, mut config) = match (&args.preset, &args.config) {
        (Some(p), _) => {
            let which: simgen::Preset = p.parse()?;
            (which.name().to_string(), simgen::preset(which))
        }
        (None, Some(path)) => {
            let stem = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
            (stem, artifacts::read_config::<ScenarioConfig>(path)?)
        }
        (None, None) => return Err(CliError::Usage("either --preset or --config is required".into())),
    };
    if let Some(n) = args.n_samples {
        config.n_samples = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let out = if args.out.is_dir() || args.out.as_os_str().to_string_lossy().ends_with(['/', '\\']) {
        args.out.join(format!("{name}.csv"))
    } else {
        args.out.clone()
    };
    let data = simgen::generate(&config)?;
    let n_obs: usize = data.samples.iter().map(FunctionalSample::len).sum();
    Dataset::numbered(data.samples).write(&out)?;
    let meta = sibling(&out, "meta.json");
    artifacts::write_json(
        &meta,
        &Sidecar::new(SimulationMeta {
            preset: args.preset.as_deref(),
            scenario: &config,
            n_samples: config.n_samples,
            noise_sd: data.noise_sd,
            mixture: &data.mixture,
            map_network: &data.map_network,
            columns: ["sample_id", "t", "value", "label"],
        }),
    )?;
    println!("wrote {} samples ({n_obs} observations) to {}", config.n_samples, out.display());
    Ok(())
}

#[derive(Serialize)]
struct IngestMeta<'a> {
    source: &'a Path,
    n_samples: usize,
    centered: bool,
    mean_file: Option<&'a Path>,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let mut data = Dataset::read(&args.data)?;
    let mean = if args.center {
        Some(MeanCurve::estimate(&data.samples)?)
    } else if let Some(path) = &args.mean_from {
        Some(artifacts::read_config::<MeanCurve>(path)?)
    } else {
        None
    };
    let mut mean_file = None;
    if let Some(mean) = &mean {
        data.samples = data.samples.iter().map(|s| mean.center(s)).collect::<fae_core::Result<Vec<_>>>()?;
        if args.center {
            let path = sibling(&args.out, "mean.json");
            artifacts::write_config(&path, mean)?;
            mean_file = Some(path);
        }
    }
    data.write(&args.out)?;
    artifacts::write_json(
        &sibling(&args.out, "meta.json"),
        &Sidecar::new(IngestMeta {
            source: &args.data,
            n_samples: data.len(),
            centered: mean.is_some(),
            mean_file: mean_file.as_deref().or(args.mean_from.as_deref()),
        }),
    )?;
    let labels = data.labels().map(|mut l| {
        l.sort_unstable();
        l.dedup();
        l.len()
    });
    println!(
        "ingested {} samples{} to {}",
        data.len(),
        labels.map_or(String::new(), |k| format!(" with {k} classes")),
        args.out.display()
    );
    Ok(())
}

/// Ten cubic B-splines spanning the observed time range.
fn default_basis(samples: &[FunctionalSample]) -> Result<BasisSystem> {
    let grid = union_grid(samples);
    let domain = Domain::new(grid[0], grid[grid.len() - 1])?;
    Ok(BasisSystem::bspline(domain, 10, 4)?)
}

fn resolve_spec(args: &TrainArgs, samples: &[FunctionalSample]) -> Result<ModelSpec> {
    let Some(path) = &args.config else {
        let k = args.components.unwrap_or(3);
        let basis = default_basis(samples)?;
        return Ok(match args.model {
            ModelKind::Fae => ModelSpec::Fae(FaeConfig::new(basis.clone(), basis, vec![k], Activation::Identity)),
            ModelKind::Ae => ModelSpec::Ae(AeConfig::new(vec![k], Activation::Identity)),
            ModelKind::Fpca => ModelSpec::Fpca(FpcaConfig::new(basis, k)),
        });
    };
    let mut spec: ModelSpec = artifacts::read_config(path)?;
    if ModelKind::of(&spec) != args.model {
        return Err(CliError::format(
            path,
            format!("config describes a {} model but {} was requested", ModelKind::of(&spec).name(), args.model.name()),
        ));
    }
    match (&mut spec, args.components) {
        (ModelSpec::Fpca(c), Some(k)) => c.num_components = k,
        (_, Some(_)) => {
            return Err(CliError::Usage(
                "--components only overrides FPCA configs; set hidden_sizes in the config instead".into(),
            ))
        }
        _ => {}
    }
    Ok(spec)
}

fn write_loss_log(path: &Path, history: &[f64]) -> Result<()> {
    artifacts::ensure_parent(path)?;
    let run = || -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "loss"])?;
        for (e, l) in history.iter().enumerate() {
            w.write_record([(e + 1).to_string(), format!("{l:?}")])?;
        }
        w.flush()
    };
    run().map_err(|e| CliError::io(path, e))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let data = Dataset::read(&args.data)?;
    let spec = resolve_spec(args, &data.samples)?;
    let grid = union_grid(&data.samples);
    let (model, history) = TrainedModel::fit(&spec, &data.samples, &grid, args.seed)?;
    let final_loss = match &model {
        TrainedModel::Fpca(_) => {
            let preds = data.samples.iter().map(|s| model.predict(s)).collect::<fae_core::Result<Vec<_>>>()?;
            eval::mse_p(&data.samples, &preds)?
        }
        _ => *history.last().ok_or_else(|| CliError::Usage("training ran for zero epochs".into()))?,
    };
    if let TrainedModel::Fpca(_) = model {
        println!("fpca fitted; training MSE_p {final_loss:e}");
    } else {
        let log = args.loss_log.clone().unwrap_or_else(|| sibling(&args.out, "loss.csv"));
        write_loss_log(&log, &history)?;
        artifacts::write_json(
            &sibling(&log, "meta.json"),
            &Sidecar::new(serde_json::json!({ "model_file": args.out, "columns": ["epoch", "loss"] })),
        )?;
        println!("final training loss {final_loss:e} after {} epochs", history.len());
    }
    artifacts::write_json(
        &args.out,
        &ModelFile {
            schema_version: SCHEMA_VERSION,
            invocation: Invocation::current(),
            data: args.data.clone(),
            spec,
            seed: args.seed,
            final_loss: Some(final_loss),
            model,
        },
    )
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    invocation: Invocation,
    data: &'a Path,
    model_source: &'a Path,
    report: &'a ExperimentReport,
}

/// Runs every replicate on `jobs` threads; results are ordered by replicate.
fn run_replicates(
    samples: &[FunctionalSample],
    spec: &ModelSpec,
    args: &EvaluateArgs,
) -> Result<Vec<ReplicateOutcome>> {
    let jobs = args.jobs.clamp(1, args.replicates.max(1));
    let mut slots: Vec<Option<fae_core::Result<ReplicateOutcome>>> = (0..args.replicates).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                scope.spawn(move || {
                    (w..args.replicates)
                        .step_by(jobs)
                        .map(|r| (r, eval::run_replicate(samples, spec, args.train_fraction, args.seed, r)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (r, out) in h.join().expect("replicate worker panicked") {
                slots[r] = Some(out);
            }
        }
    });
    Ok(slots
        .into_iter()
        .map(|s| s.expect("every replicate ran"))
        .collect::<fae_core::Result<Vec<_>>>()?)
}

fn model_names(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned()))
        .collect();
    stems
        .iter()
        .enumerate()
        .map(|(i, s)| if stems.iter().filter(|o| *o == s).count() > 1 { format!("{s}-{i}") } else { s.clone() })
        .collect()
}

fn write_report_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    artifacts::ensure_parent(path)?;
    let run = || -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["replicate", "seed", "mse_p", "p_classification"])?;
        for r in &report.replicates {
            w.write_record([
                r.replicate.to_string(),
                r.seed.to_string(),
                format!("{:?}", r.mse_p),
                r.p_classification.map(|p| format!("{p:?}")).unwrap_or_default(),
            ])?;
        }
        w.flush()
    };
    run().map_err(|e| CliError::io(path, e))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let data = Dataset::read(&args.data)?;
    let grid = args.eval_grid.as_deref().map(artifacts::parse_grid).transpose()?;
    for (path, name) in args.models.iter().zip(model_names(&args.models)) {
        let spec = artifacts::read_spec(path)?;
        let outcomes = run_replicates(&data.samples, &spec, args)?;
        let report = ExperimentReport::new(
            spec.clone(),
            args.train_fraction,
            args.seed,
            outcomes.iter().map(|o| o.result).collect(),
        );
        artifacts::write_json(
            &args.out.join(format!("{name}.report.json")),
            &ReportFile {
                schema_version: SCHEMA_VERSION,
                invocation: Invocation::current(),
                data: &args.data,
                model_source: path,
                report: &report,
            },
        )?;
        let csv_path = args.out.join(format!("{name}.report.csv"));
        write_report_csv(&csv_path, &report)?;
        artifacts::write_json(
            &sibling(&csv_path, "meta.json"),
            &Sidecar::new(serde_json::json!({ "report": format!("{name}.report.json") })),
        )?;

        // Test-set reconstructions of the first replicate. The AE only
        // reconstructs on its training grid, so it ignores --eval-grid.
        let first = &outcomes[0];
        let test: Vec<usize> = first.split.test.clone();
        let native = matches!(first.model, TrainedModel::Ae(_));
        let times: Vec<&[f64]> = test
            .iter()
            .map(|&i| match (&grid, native) {
                (Some(g), false) => g.as_slice(),
                _ => data.samples[i].times(),
            })
            .collect();
        let values = test
            .iter()
            .zip(&times)
            .map(|(&i, t)| first.model.reconstruct_at(&data.samples[i], t))
            .collect::<fae_core::Result<Vec<_>>>()?;
        let ids: Vec<&str> = test.iter().map(|&i| data.ids[i].as_str()).collect();
        let recon_path = args.out.join(format!("{name}.reconstruction.csv"));
        write_curves(&recon_path, &ids, &times, &values)?;
        artifacts::write_json(
            &sibling(&recon_path, "meta.json"),
            &Sidecar::new(serde_json::json!({
                "replicate": 0,
                "seed": first.result.seed,
                "grid": if native { "observed" } else if grid.is_some() { "eval_grid" } else { "observed" },
            })),
        )?;

        let s = &report.summary;
        let acc = s
            .p_classification
            .map_or(String::new(), |p| format!(", accuracy {:.4} ({:.4})", p.mean, p.sd));
        println!("{name}: MSE_p {:.6e} ({:.2e}){acc} over {} replicates", s.mse_p.mean, s.mse_p.sd, args.replicates);
    }
    Ok(())
}

pub fn smooth(args: &SmoothArgs) -> Result<()> {
    let file = artifacts::read_model(&args.model)?;
    let data = Dataset::read(&args.data)?;
    let grid = args.grid.as_deref().map(artifacts::parse_grid).transpose()?;
    let mean = args.mean.as_deref().map(artifacts::read_config::<MeanCurve>).transpose()?;
    let times: Vec<&[f64]> = data
        .samples
        .iter()
        .map(|s| grid.as_deref().unwrap_or(s.times()))
        .collect();
    let mut values = Vec::with_capacity(data.len());
    for (s, t) in data.samples.iter().zip(&times) {
        let v = file.model.reconstruct_at(s, t)?;
        let v = match &mean {
            Some(m) => m.uncenter(&FunctionalSample::new(t.to_vec(), v, None)?)?.values().to_vec(),
            None => v,
        };
        values.push(v);
    }
    let ids: Vec<&str> = data.ids.iter().map(String::as_str).collect();
    write_curves(&args.out, &ids, &times, &values)?;
    artifacts::write_json(
        &sibling(&args.out, "meta.json"),
        &Sidecar::new(serde_json::json!({ "model_file": args.model, "data": args.data, "grid": args.grid })),
    )?;
    println!("wrote {} smoothed curves to {}", data.len(), args.out.display());
    Ok(())
}
