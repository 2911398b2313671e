//! Layered runtime configuration.
//!
//! Precedence, lowest to highest: built-in defaults, a JSON config file
//! (`--config` flag, else the `TEXTLINE_MDL_CONFIG` environment variable),
//! then individual command-line flags. The effective configuration is echoed
//! into every run report so results stay reproducible from the artifacts
//! alone.

use std::path::Path;

use serde::{Deserialize, Serialize};
use textline_core::imaging::ImagingParams;
use textline_core::EnergyParams;

use crate::commands::CliError;

/// Environment variable naming a fallback config file.
pub const CONFIG_ENV: &str = "TEXTLINE_MDL_CONFIG";

/// Everything tunable from outside: energy/optimizer constants and the
/// blob-detection thresholds. Partial files are fine; missing fields keep
/// their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub energy: EnergyParams,
    pub imaging: ImagingParams,
}

/// Per-invocation flag overrides applied on top of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_iters: Option<u32>,
}

impl Config {
    pub fn from_json(s: &str) -> Result<Config, CliError> {
        let config: Config =
            serde_json::from_str(s).map_err(|e| CliError::Input(format!("config file: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.energy.validate().map_err(|e| CliError::Input(format!("config file: {e}")))?;
        self.imaging.validate().map_err(|e| CliError::Input(format!("config file: {e}")))
    }

    /// Resolve the configuration for one invocation. `explicit` is the
    /// `--config` value; when absent, `TEXTLINE_MDL_CONFIG` is consulted.
    pub fn load(explicit: Option<&Path>) -> Result<Config, CliError> {
        let from_env = std::env::var_os(CONFIG_ENV).map(std::path::PathBuf::from);
        let path = match (explicit, from_env.as_deref()) {
            (Some(p), _) => Some(p),
            (None, Some(p)) => Some(p),
            (None, None) => None,
        };
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("config file {}: {e}", p.display())))?;
                Config::from_json(&text)
            }
        }
    }

    pub fn apply(&mut self, overrides: Overrides) -> Result<(), CliError> {
        if let Some(seed) = overrides.seed {
            self.energy.rng_seed = seed;
        }
        if let Some(iters) = overrides.max_iters {
            self.energy.max_iterations = iters;
        }
        self.validate()
    }
}
