//! Experiment pipelines and file formats around `deepcov-core`.
//!
//! Each experiment takes a JSON config (CLI flags override the document),
//! writes a `manifest.json` echoing the fully resolved configuration and
//! seed, and emits plot-ready CSV tables. Runs are reproducible bit for bit
//! from their manifest on the same build.

pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
