//! Experiment configuration, loaded from JSON with strict field checking.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn default_alpha() -> f64 {
    16.0
}
fn default_mu() -> f64 {
    1e-3
}
fn default_sigma_xi() -> f64 {
    1e-4
}
fn default_ranks() -> Vec<usize> {
    vec![1, 4, 8, 16, 32, 64]
}
fn default_dim() -> usize {
    32
}
fn default_steps() -> u64 {
    256
}
fn default_eta() -> f64 {
    1e-4
}
fn default_replicates() -> usize {
    5
}
fn default_mc_samples() -> usize {
    4000
}
fn default_rho() -> f64 {
    0.8
}
fn default_schema() -> u32 {
    SCHEMA_VERSION
}

/// One experiment's knobs. Unknown fields are rejected so that typos in
/// config files fail loudly instead of silently running defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_sigma_xi")]
    pub sigma_xi: f64,
    #[serde(default = "default_ranks")]
    pub ranks: Vec<usize>,
    #[serde(default = "default_dim")]
    pub d_out: usize,
    #[serde(default = "default_dim")]
    pub d_in: usize,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Spectral concentration of the constructed gradient in the
    /// mechanism trace.
    #[serde(default = "default_rho")]
    pub rho: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.alpha <= 0.0 || self.mu <= 0.0 || self.eta <= 0.0 {
            return Err(Error::Config("alpha, mu, eta must be > 0".into()));
        }
        if self.sigma_xi < 0.0 {
            return Err(Error::Config("sigma_xi must be >= 0".into()));
        }
        if self.ranks.is_empty() || self.ranks.iter().any(|&r| r == 0) {
            return Err(Error::Config("ranks must be nonempty and positive".into()));
        }
        if self.d_out == 0 || self.d_in == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.replicates == 0 || self.mc_samples == 0 || self.steps == 0 {
            return Err(Error::Config(
                "replicates, mc_samples, steps must be >= 1".into(),
            ));
        }
        if !(0.0 < self.rho && self.rho <= 1.0) {
            return Err(Error::Config("rho must lie in (0, 1]".into()));
        }
        Ok(())
    }
}
