//! Experiment runner behind the `ddsim` binary: resolves a configuration,
//! runs one experiment and writes its CSV and manifest.

pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{Experiment, ExperimentConfig};
pub use run::{run, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown experiment `{0}` (expected one of pdd, sdd, cdd, cpmg, rd-table, verify-analysis)")]
    UnknownExperiment(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Sim(#[from] ddsim::Error),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Removes `--config FILE` / `--config=FILE` from the override list.
pub fn take_config_flag(args: &[String]) -> Result<(Option<PathBuf>, Vec<String>), CliError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let p = it.next().ok_or_else(|| CliError::Config {
                key: "config".into(),
                reason: "missing file name".into(),
            })?;
            path = Some(PathBuf::from(p));
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a.clone());
        }
    }
    Ok((path, rest))
}

/// Resolves the configuration for `experiment` from an optional config
/// file and `--key value` overrides.
pub fn load_config(experiment: &str, config: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let experiment: Experiment = experiment.parse()?;
    let file_entries = match config {
        Some(p) => config::parse_config_text(&std::fs::read_to_string(p).map_err(io_err(p))?)?,
        None => Vec::new(),
    };
    let overrides = config::parse_overrides(overrides)?;
    ExperimentConfig::resolve(experiment, &file_entries, &overrides)
}
