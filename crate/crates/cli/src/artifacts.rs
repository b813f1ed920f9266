//! Versioned JSON envelopes for configs, models, reports and CSV sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use fae_core::basis::Domain;
use fae_core::eval::{ModelSpec, TrainedModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// Version stamped into every JSON file this tool writes.
pub const SCHEMA_VERSION: u32 = 1;

/// The command line that produced a file, enough to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub program_version: String,
    pub args: Vec<String>,
}

impl Invocation {
    pub fn current() -> Self {
        Invocation {
            program_version: env!("CARGO_PKG_VERSION").to_string(),
            args: std::env::args().collect(),
        }
    }
}

/// Serialized trained model with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub invocation: Invocation,
    pub data: PathBuf,
    pub spec: ModelSpec,
    pub seed: Option<u64>,
    pub final_loss: Option<f64>,
    pub model: TrainedModel,
}

/// Sidecar describing a CSV artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar<T> {
    pub schema_version: u32,
    pub invocation: Invocation,
    #[serde(flatten)]
    pub content: T,
}

impl<T> Sidecar<T> {
    pub fn new(content: T) -> Self {
        Sidecar {
            schema_version: SCHEMA_VERSION,
            invocation: Invocation::current(),
            content,
        }
    }
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        _ => Ok(()),
    }
}

/// `data.csv` → `data.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn read_value(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

fn check_version(path: &Path, value: &Value, required: bool) -> Result<()> {
    match value.get("schema_version") {
        Some(Value::Number(n)) if n.as_u64() == Some(u64::from(SCHEMA_VERSION)) => Ok(()),
        Some(other) => Err(CliError::format(
            path,
            format!("unsupported schema_version {other} (expected {SCHEMA_VERSION})"),
        )),
        None if required => Err(CliError::format(path, "missing schema_version")),
        None => Ok(()),
    }
}

/// Reads a hand-written config: an object whose optional `schema_version`
/// must match, with the remaining keys forming `T`.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut value = read_value(path)?;
    check_version(path, &value, false)?;
    if let Value::Object(map) = &mut value {
        map.remove("schema_version");
    }
    serde_json::from_value(value).map_err(|e| CliError::format(path, e))
}

/// Writes a config in the form [`read_config`] accepts.
pub fn write_config<T: Serialize>(path: &Path, config: &T) -> Result<()> {
    let mut value = serde_json::to_value(config).map_err(|e| CliError::format(path, e))?;
    if let Value::Object(map) = &mut value {
        map.insert("schema_version".into(), SCHEMA_VERSION.into());
    }
    write_json(path, &value)
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let value = read_value(path)?;
    check_version(path, &value, true)?;
    serde_json::from_value(value).map_err(|e| CliError::format(path, e))
}

/// Model specification from either a trained model file or a config file.
pub fn read_spec(path: &Path) -> Result<ModelSpec> {
    let value = read_value(path)?;
    if value.get("model").is_some_and(Value::is_object) {
        return Ok(read_model(path)?.spec);
    }
    read_config(path)
}

/// Parses `lo:hi:n` into `n` evenly spaced points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("grid `{spec}` must look like lo:hi:n with lo < hi and n >= 2"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n < 2 {
        return Err(bad());
    }
    let domain = Domain::new(lo, hi).map_err(|_| bad())?;
    Ok(domain.uniform_grid(n))
}
