//! Scenario runner behind the `slitsim` binary.

pub mod config;
pub mod plot;
pub mod scenarios;

pub use config::{ConfigError, Overrides, RunConfig, Scenario};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] slitsim::Error),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> Value {
        match self {
            CliError::Config(e) => json!({ "error": "config", "message": self.to_string(), "missing": e.missing, "invalid": e.invalid }),
            CliError::Simulation(_) => json!({ "error": "simulation", "message": self.to_string() }),
            CliError::Plot(_) => json!({ "error": "plot", "message": self.to_string() }),
            CliError::Io(_) | CliError::Json(_) => json!({ "error": "io", "message": self.to_string() }),
            CliError::Pool(_) => json!({ "error": "runtime", "message": self.to_string() }),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub scenario: &'static str,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
    pub summary: Value,
}

fn hash_file(dir: &Path, name: &str) -> Result<ManifestEntry, CliError> {
    let bytes = std::fs::read(dir.join(name))?;
    Ok(ManifestEntry { path: name.to_string(), sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
}

/// Run a scenario, optionally inside a pool of `workers` threads, and write
/// `manifest.json` next to the artifacts.
pub fn run_scenario(config: &RunConfig, workers: Option<usize>) -> Result<Manifest, CliError> {
    let outcome = match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| CliError::Pool(e.to_string()))?;
            pool.install(|| scenarios::run(config))?
        }
        None => scenarios::run(config)?,
    };
    let mut names = outcome.files;
    names.sort();
    names.dedup();
    let files = names.iter().map(|n| hash_file(&config.out, n)).collect::<Result<Vec<_>, _>>()?;
    let manifest = Manifest { scenario: config.scenario.name(), seed: config.seed, files, summary: outcome.summary };
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    std::fs::write(config.out.join("manifest.json"), body)?;
    Ok(manifest)
}
