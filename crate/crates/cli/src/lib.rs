//! Command-line driver around `fae_core`: simulation, ingestion of long-format
//! CSV data, training, replicated evaluation and smoothing.

pub mod artifacts;
pub mod commands;
pub mod dataset;
pub mod error;

pub use error::{CliError, Result};
